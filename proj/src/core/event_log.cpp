// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/event_log.hpp"

#include <array>
#include <fstream>

#include "convbench/core/errors.hpp"

namespace convbench::core {

namespace {
constexpr std::array<std::pair<EventKind, std::string_view>, 11> kKinds{{
    {EventKind::job_submitted, "job_submitted"},
    {EventKind::task_enqueued, "task_enqueued"},
    {EventKind::task_started, "task_started"},
    {EventKind::task_finished, "task_finished"},
    {EventKind::worker_idle, "worker_idle"},
    {EventKind::worker_restart, "worker_restart"},
    {EventKind::store_txn, "store_txn"},
    {EventKind::infer_request, "infer_request"},
    {EventKind::infer_reply, "infer_reply"},
    {EventKind::compute, "compute"},
    {EventKind::io_wait, "io_wait"},
}};
}  // namespace

Micros now_us() {
    using namespace std::chrono;
    static const auto steady_base = steady_clock::now();
    static const auto epoch_base = duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
    return epoch_base + duration_cast<microseconds>(steady_clock::now() - steady_base).count();
}

std::string_view to_string(EventKind k) noexcept {
    for (const auto& [kind, name] : kKinds) {
        if (kind == k) return name;
    }
    return "unknown";
}

EventKind parse_event_kind(std::string_view s) {
    for (const auto& [kind, name] : kKinds) {
        if (name == s) return kind;
    }
    throw InvalidArgumentError("unknown event kind: " + std::string(s));
}

void to_json(nlohmann::json& j, const Event& e) {
    j = nlohmann::json{{"ts", e.ts}, {"kind", to_string(e.kind)}, {"meta", e.meta}};
    if (e.task) j["task"] = *e.task;
    if (e.worker) j["worker"] = *e.worker;
}

void from_json(const nlohmann::json& j, Event& e) {
    e.ts = j.at("ts").get<Micros>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.meta = j.value("meta", nlohmann::json::object());
    if (j.contains("task")) e.task = j.at("task").get<TaskId>();
    if (j.contains("worker")) e.worker = j.at("worker").get<std::string>();
}

void EventLog::append(Event e) {
    std::lock_guard lock(mu_);
    events_.push_back(std::move(e));
}

void EventLog::append(EventKind kind, std::optional<TaskId> task, std::optional<std::string> worker,
                      nlohmann::json meta) {
    append(Event{now_us(), kind, std::move(task), std::move(worker), std::move(meta)});
}

std::vector<Event> EventLog::snapshot() const {
    std::lock_guard lock(mu_);
    return events_;
}

std::size_t EventLog::size() const {
    std::lock_guard lock(mu_);
    return events_.size();
}

std::vector<Event> EventLog::for_job(const std::string& job_id) const {
    std::vector<Event> out;
    std::lock_guard lock(mu_);
    for (const auto& e : events_) {
        if (e.task && e.task->job_id == job_id) out.push_back(e);
    }
    return out;
}

void EventLog::write_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write event log: " + path);
    for (const auto& e : snapshot()) out << nlohmann::json(e).dump() << '\n';
}

}  // namespace convbench::core
