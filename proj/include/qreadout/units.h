#pragma once

#include <numbers>

namespace qreadout {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double kHz = 1.0;
inline constexpr double kKHz = 1e3;
inline constexpr double kMHz = 1e6;
inline constexpr double kGHz = 1e9;

inline constexpr double kSecond = 1.0;
inline constexpr double kMs = 1e-3;
inline constexpr double kUs = 1e-6;
inline constexpr double kNs = 1e-9;

// Ordinary frequency (Hz) to angular rate (rad/s).
constexpr double angular(double hz) { return kTwoPi * hz; }

}  // namespace qreadout
