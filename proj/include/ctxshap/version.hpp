#pragma once

namespace ctxshap {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ctxshap
