// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>

namespace flowtree {

// All engine time is millisecond resolution, relative to run start.
// A virtual clock and a real clock share these types; timestamps in
// traces and reports are therefore directly comparable across modes.
using Duration = std::chrono::milliseconds;
using TimePoint = std::chrono::milliseconds;

inline constexpr TimePoint kRunStart{0};

constexpr std::int64_t to_ms(Duration d) { return d.count(); }
constexpr Duration ms(std::int64_t v) { return Duration{v}; }
constexpr Duration seconds(std::int64_t v) { return Duration{v * 1000}; }

}  // namespace flowtree
