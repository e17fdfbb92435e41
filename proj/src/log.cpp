#include "thoughtgraph/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace tgraph::log {

namespace {

std::mutex sink_mutex;
std::atomic<Level> min_level{Level::Info};

void stderr_sink(Level level, std::string_view message) {
    static constexpr const char* names[] = {"debug", "info", "warning", "error"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
}

Sink& current() {
    static Sink sink = stderr_sink;
    return sink;
}

} // namespace

Sink set_sink(Sink sink) {
    std::lock_guard lock(sink_mutex);
    auto old = std::move(current());
    current() = sink ? std::move(sink) : Sink(stderr_sink);
    return old;
}

void set_min_level(Level level) { min_level = level; }

void write(Level level, std::string_view message) {
    if (level < min_level.load()) return;
    std::lock_guard lock(sink_mutex);
    current()(level, message);
}

} // namespace tgraph::log
