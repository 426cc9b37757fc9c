#pragma once

namespace hbac {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hbac
