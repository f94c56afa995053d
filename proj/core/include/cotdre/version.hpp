#pragma once

namespace cotdre {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cotdre
