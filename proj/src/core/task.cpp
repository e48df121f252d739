// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/task.hpp"

#include "convbench/core/errors.hpp"

namespace convbench::core {

std::string_view to_string(TaskStatus s) noexcept {
    switch (s) {
        case TaskStatus::queued: return "queued";
        case TaskStatus::running: return "running";
        case TaskStatus::succeeded: return "succeeded";
        case TaskStatus::failed: return "failed";
        case TaskStatus::timed_out: return "timed_out";
    }
    return "unknown";
}

TaskStatus parse_status(std::string_view s) {
    if (s == "queued") return TaskStatus::queued;
    if (s == "running") return TaskStatus::running;
    if (s == "succeeded") return TaskStatus::succeeded;
    if (s == "failed") return TaskStatus::failed;
    if (s == "timed_out") return TaskStatus::timed_out;
    throw InvalidArgumentError("unknown task status: " + std::string(s));
}

bool transition_allowed(const TaskState& current, const TaskState& next) noexcept {
    if (is_terminal(current.status)) return false;
    if (next.attempt > current.attempt) {
        return next.status == TaskStatus::queued || next.status == TaskStatus::running;
    }
    if (next.attempt < current.attempt) return false;
    switch (current.status) {
        case TaskStatus::queued: return next.status == TaskStatus::running;
        case TaskStatus::running: return is_terminal(next.status);
        default: return false;
    }
}

namespace {
template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}
template <typename T>
void get_opt(const json& j, const char* key, std::optional<T>& v) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) {
        v = it->get<T>();
    } else {
        v.reset();
    }
}
}  // namespace

void to_json(json& j, const Task& t) {
    j = json{{"id", t.id}, {"kind", t.kind}, {"payload", t.payload}, {"created_at", t.created_at},
             {"attempt", t.attempt}};
    put_opt(j, "parent", t.parent);
    put_opt(j, "timeout_s", t.timeout_s);
}

void from_json(const json& j, Task& t) {
    t.id = j.at("id").get<TaskId>();
    t.kind = j.at("kind").get<std::string>();
    t.payload = j.value("payload", json::object());
    t.created_at = j.value("created_at", Micros{0});
    t.attempt = j.value("attempt", 1);
    get_opt(j, "parent", t.parent);
    get_opt(j, "timeout_s", t.timeout_s);
}

void to_json(json& j, const TaskState& s) {
    j = json{{"id", s.id}, {"status", to_string(s.status)}, {"attempt", s.attempt},
             {"created_at", s.created_at}};
    put_opt(j, "worker", s.worker);
    put_opt(j, "started_at", s.started_at);
    put_opt(j, "finished_at", s.finished_at);
    put_opt(j, "result_key", s.result_key);
    put_opt(j, "error", s.error);
    if (!s.result.is_null()) j["result"] = s.result;
}

void from_json(const json& j, TaskState& s) {
    s.id = j.at("id").get<TaskId>();
    s.status = parse_status(j.at("status").get<std::string>());
    s.attempt = j.value("attempt", 1);
    s.created_at = j.value("created_at", Micros{0});
    get_opt(j, "worker", s.worker);
    get_opt(j, "started_at", s.started_at);
    get_opt(j, "finished_at", s.finished_at);
    get_opt(j, "result_key", s.result_key);
    get_opt(j, "error", s.error);
    s.result = j.contains("result") ? j.at("result") : json();
}

}  // namespace convbench::core
