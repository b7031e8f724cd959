#pragma once

namespace bci {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bci
