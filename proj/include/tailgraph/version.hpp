#pragma once

namespace tailgraph {

inline constexpr const char* version() { return "0.1.0"; }

}  // namespace tailgraph
