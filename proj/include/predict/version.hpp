#pragma once

namespace predict {

inline constexpr const char* kVersion = "0.1.0";

} // namespace predict
