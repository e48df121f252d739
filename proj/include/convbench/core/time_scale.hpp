// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>

namespace convbench::core {

using Micros = std::int64_t;

/// Simulated durations (seconds, as the cost model states them) are divided
/// by `factor` to obtain the wall-clock time actually waited.
struct TimeScale {
    double factor = 100.0;

    std::chrono::nanoseconds to_real(double sim_seconds) const {
        return std::chrono::nanoseconds(static_cast<std::int64_t>(sim_seconds / factor * 1e9));
    }
    double to_sim_seconds(Micros real_us) const { return static_cast<double>(real_us) * 1e-6 * factor; }
    Micros to_real_us(double sim_seconds) const {
        return static_cast<Micros>(sim_seconds / factor * 1e6);
    }
};

/// Microseconds since the Unix epoch, derived from the steady clock so that
/// values are monotone within a process.
Micros now_us();

}  // namespace convbench::core
