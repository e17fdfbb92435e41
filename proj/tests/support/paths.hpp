#pragma once

#include <string>

namespace tgraph::testing {

inline std::string fixture(const std::string& name) { return std::string(TG_FIXTURES) + "/" + name; }

} // namespace tgraph::testing
