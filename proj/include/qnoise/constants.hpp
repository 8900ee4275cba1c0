#pragma once

#include <numbers>

namespace qnoise {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace qnoise
