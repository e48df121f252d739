// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "convbench/core/task.hpp"

namespace convbench::core {

/// Task state and return values, readable by every worker.
class ResultBackend {
public:
    virtual ~ResultBackend() = default;

    /// Throws IllegalTransitionError (carrying the current state) when the
    /// write would violate the status state machine.
    virtual void set_state(const TaskState& state) = 0;
    virtual std::optional<TaskState> get_state(const TaskId& id) = 0;
    virtual std::vector<std::optional<TaskState>> get_states(const std::vector<TaskId>& ids);
};

class InMemoryResultBackend final : public ResultBackend {
public:
    void set_state(const TaskState& state) override;
    std::optional<TaskState> get_state(const TaskId& id) override;
    std::vector<std::optional<TaskState>> get_states(const std::vector<TaskId>& ids) override;

    std::vector<TaskState> states_for_job(const std::string& job_id) const;

private:
    mutable std::mutex mu_;
    std::unordered_map<TaskId, TaskState> states_;
};

}  // namespace convbench::core
