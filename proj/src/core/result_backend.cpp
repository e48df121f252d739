// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/result_backend.hpp"

#include "convbench/core/errors.hpp"

namespace convbench::core {

std::vector<std::optional<TaskState>> ResultBackend::get_states(const std::vector<TaskId>& ids) {
    std::vector<std::optional<TaskState>> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(get_state(id));
    return out;
}

void InMemoryResultBackend::set_state(const TaskState& state) {
    std::lock_guard lock(mu_);
    auto it = states_.find(state.id);
    if (it == states_.end()) {
        states_.emplace(state.id, state);
        return;
    }
    if (!transition_allowed(it->second, state)) {
        throw IllegalTransitionError("illegal transition for " + state.id.str() + ": " +
                                         std::string(to_string(it->second.status)) + " -> " +
                                         std::string(to_string(state.status)),
                                     json(it->second).dump());
    }
    it->second = state;
}

std::optional<TaskState> InMemoryResultBackend::get_state(const TaskId& id) {
    std::lock_guard lock(mu_);
    auto it = states_.find(id);
    if (it == states_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::optional<TaskState>> InMemoryResultBackend::get_states(const std::vector<TaskId>& ids) {
    std::vector<std::optional<TaskState>> out;
    out.reserve(ids.size());
    std::lock_guard lock(mu_);
    for (const auto& id : ids) {
        auto it = states_.find(id);
        out.push_back(it == states_.end() ? std::nullopt : std::optional<TaskState>(it->second));
    }
    return out;
}

std::vector<TaskState> InMemoryResultBackend::states_for_job(const std::string& job_id) const {
    std::vector<TaskState> out;
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : states_) {
        if (id.job_id == job_id) out.push_back(s);
    }
    return out;
}

}  // namespace convbench::core
