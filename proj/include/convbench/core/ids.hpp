// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

namespace convbench::core {

/// Identifies a task within a job. `sequence` is a dotted path from the job
/// root ("0", "0.3", "0.3.1"), so a retried parent regenerates the same ids
/// for its children.
struct TaskId {
    std::string job_id;
    std::string sequence;

    static TaskId root(std::string job_id) { return TaskId{std::move(job_id), "0"}; }

    TaskId child(std::size_t index) const { return TaskId{job_id, sequence + "." + std::to_string(index)}; }

    bool is_root() const noexcept { return sequence == "0"; }

    /// Depth below the job root (root = 0).
    std::size_t depth() const noexcept;

    std::string str() const { return job_id + "/" + sequence; }

    /// Inverse of str(); throws InvalidArgumentError on malformed input.
    static TaskId parse(const std::string& text);

    auto operator<=>(const TaskId&) const = default;
};

void to_json(nlohmann::json& j, const TaskId& id);
void from_json(const nlohmann::json& j, TaskId& id);

}  // namespace convbench::core

template <>
struct std::hash<convbench::core::TaskId> {
    std::size_t operator()(const convbench::core::TaskId& id) const noexcept {
        return std::hash<std::string>{}(id.job_id) * 31u ^ std::hash<std::string>{}(id.sequence);
    }
};
