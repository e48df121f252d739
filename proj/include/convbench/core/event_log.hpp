// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "convbench/core/ids.hpp"
#include "convbench/core/time_scale.hpp"

namespace convbench::core {

enum class EventKind {
    job_submitted,
    task_enqueued,
    task_started,
    task_finished,
    worker_idle,
    worker_restart,
    store_txn,
    infer_request,
    infer_reply,
    compute,  // a compute-bound section; meta: stage, start_us, dur_us
    io_wait,  // a yielding wait that is not a store or model call; meta: stage, dur_us
};

std::string_view to_string(EventKind k) noexcept;
EventKind parse_event_kind(std::string_view s);

struct Event {
    Micros ts = 0;
    EventKind kind = EventKind::job_submitted;
    std::optional<TaskId> task;
    std::optional<std::string> worker;
    nlohmann::json meta = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const Event& e);
void from_json(const nlohmann::json& j, Event& e);

/// Append-only, safe for concurrent writers.
class EventLog {
public:
    void append(Event e);
    void append(EventKind kind, std::optional<TaskId> task, std::optional<std::string> worker,
                nlohmann::json meta = nlohmann::json::object());

    std::vector<Event> snapshot() const;
    std::size_t size() const;

    /// Events whose task belongs to `job_id` plus the job_submitted marker.
    std::vector<Event> for_job(const std::string& job_id) const;

    void write_jsonl(const std::string& path) const;

private:
    mutable std::mutex mu_;
    std::vector<Event> events_;
};

}  // namespace convbench::core
