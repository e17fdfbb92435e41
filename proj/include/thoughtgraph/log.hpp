#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace tgraph::log {

enum class Level { Debug, Info, Warning, Error };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink (stderr by default). Returns the old one.
Sink set_sink(Sink sink);
void set_min_level(Level level);

void write(Level level, std::string_view message);
inline void debug(std::string_view m) { write(Level::Debug, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void warning(std::string_view m) { write(Level::Warning, m); }

} // namespace tgraph::log
