// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "convbench/core/ids.hpp"
#include "convbench/core/time_scale.hpp"

namespace convbench::core {

using nlohmann::json;

struct Task {
    TaskId id;
    std::string kind;
    json payload = json::object();
    std::optional<TaskId> parent;
    Micros created_at = 0;
    int attempt = 1;
    /// Simulated seconds after start before the worker gives up on it.
    std::optional<double> timeout_s;
};

enum class TaskStatus { queued, running, succeeded, failed, timed_out };

std::string_view to_string(TaskStatus s) noexcept;
TaskStatus parse_status(std::string_view s);

inline bool is_terminal(TaskStatus s) noexcept {
    return s == TaskStatus::succeeded || s == TaskStatus::failed || s == TaskStatus::timed_out;
}

struct TaskState {
    TaskId id;
    TaskStatus status = TaskStatus::queued;
    int attempt = 1;
    std::optional<std::string> worker;
    Micros created_at = 0;
    std::optional<Micros> started_at;
    std::optional<Micros> finished_at;
    std::optional<std::string> result_key;
    std::optional<std::string> error;
    /// Task return value, kept in the results backend (not the blob store).
    json result;
};

/// Whether `next` may overwrite `current`. Within one attempt the status only
/// moves queued -> running -> terminal; a redelivery (higher attempt) may reset
/// a non-terminal state. Terminal states are final.
bool transition_allowed(const TaskState& current, const TaskState& next) noexcept;

void to_json(json& j, const Task& t);
void from_json(const json& j, Task& t);
void to_json(json& j, const TaskState& s);
void from_json(const json& j, TaskState& s);

}  // namespace convbench::core
