#pragma once

namespace ebm {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ebm
