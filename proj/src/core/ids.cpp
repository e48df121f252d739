// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/ids.hpp"

#include <algorithm>

#include "convbench/core/errors.hpp"

namespace convbench::core {

std::size_t TaskId::depth() const noexcept {
    return static_cast<std::size_t>(std::count(sequence.begin(), sequence.end(), '.'));
}

TaskId TaskId::parse(const std::string& text) {
    const auto slash = text.rfind('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == text.size()) {
        throw InvalidArgumentError("malformed task id: " + text);
    }
    return TaskId{text.substr(0, slash), text.substr(slash + 1)};
}

void to_json(nlohmann::json& j, const TaskId& id) { j = id.str(); }

void from_json(const nlohmann::json& j, TaskId& id) { id = TaskId::parse(j.get<std::string>()); }

}  // namespace convbench::core
