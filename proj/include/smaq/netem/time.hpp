#pragma once

#include <cstdint>

namespace smaq::netem {

// Simulated time in nanoseconds.
using Time = int64_t;

constexpr Time kNever = INT64_MAX;

constexpr Time nanoseconds(int64_t v) { return v; }
constexpr Time microseconds(int64_t v) { return v * 1000; }
constexpr Time milliseconds(int64_t v) { return v * 1'000'000; }
constexpr Time seconds(int64_t v) { return v * 1'000'000'000; }

constexpr double to_seconds(Time t) { return double(t) / 1e9; }
constexpr double to_millis(Time t) { return double(t) / 1e6; }

}  // namespace smaq::netem
