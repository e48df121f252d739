// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convbench/core/errors.hpp"
#include "convbench/core/event_log.hpp"

namespace convbench::bench {

using nlohmann::json;

/// Timings are simulated seconds measured from t0 (the job_submitted event).
struct MetricsReport {
    std::string job_id;
    core::Micros t0_us = 0;  // wall clock
    double td_s = 0;         // last task leaves the queue
    double tw_s = 0;         // first worker runs out of work
    double tts_s = 0;
    std::uint64_t pages_total = 0;
    double effective_throughput = 0;  // pages / tts
    double sustained_throughput = 0;  // pages / (tw - t0)
    /// Alternative reading: pages finished by tw, over tw - t0.
    double sustained_completed_throughput = 0;
    double serial_time_s = 0;
    std::map<std::string, double> serial_time_by_stage;
    double model_share = 0;  // (layout + table) / serial_time
    std::size_t task_count = 0;
    std::size_t store_txn_count = 0;
    std::size_t worker_count = 0;

    bool operator==(const MetricsReport&) const = default;
};

void to_json(json& j, const MetricsReport& r);
void from_json(const json& j, MetricsReport& r);

/// Raised when some enqueued task has no terminal event.
class IncompleteLogError : public Error {
public:
    IncompleteLogError(std::string message, std::vector<std::string> missing)
        : Error("incomplete_log", std::move(message)), missing_(std::move(missing)) {}
    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    std::vector<std::string> missing_;
};

/// Metrics of one job from the shared event log. Events of other jobs are ignored.
MetricsReport compute_metrics(const std::vector<core::Event>& events, const std::string& job_id,
                              std::uint64_t pages_total, core::TimeScale scale);

/// Whether t0 <= td <= tw <= t0 + tts and effective <= sustained hold.
bool metric_identities_hold(const MetricsReport& r);

}  // namespace convbench::bench
