// SPDX-License-Identifier: Apache-2.0
#include "convbench/bench/metrics.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "convbench/pipeline/job.hpp"

namespace convbench::bench {

using core::Event;
using core::EventKind;
using core::Micros;
using core::TaskId;

void to_json(json& j, const MetricsReport& r) {
    j = json{{"job_id", r.job_id},
             {"t0_us", r.t0_us},
             {"td_s", r.td_s},
             {"tw_s", r.tw_s},
             {"tts_s", r.tts_s},
             {"pages_total", r.pages_total},
             {"effective_throughput", r.effective_throughput},
             {"sustained_throughput", r.sustained_throughput},
             {"sustained_completed_throughput", r.sustained_completed_throughput},
             {"serial_time_s", r.serial_time_s},
             {"serial_time_by_stage", r.serial_time_by_stage},
             {"model_share", r.model_share},
             {"task_count", r.task_count},
             {"store_txn_count", r.store_txn_count},
             {"worker_count", r.worker_count}};
}

void from_json(const json& j, MetricsReport& r) {
    r.job_id = j.at("job_id").get<std::string>();
    r.t0_us = j.at("t0_us").get<Micros>();
    r.td_s = j.at("td_s").get<double>();
    r.tw_s = j.at("tw_s").get<double>();
    r.tts_s = j.at("tts_s").get<double>();
    r.pages_total = j.at("pages_total").get<std::uint64_t>();
    r.effective_throughput = j.at("effective_throughput").get<double>();
    r.sustained_throughput = j.at("sustained_throughput").get<double>();
    r.sustained_completed_throughput = j.at("sustained_completed_throughput").get<double>();
    r.serial_time_s = j.at("serial_time_s").get<double>();
    r.serial_time_by_stage = j.at("serial_time_by_stage").get<std::map<std::string, double>>();
    r.model_share = j.at("model_share").get<double>();
    r.task_count = j.at("task_count").get<std::size_t>();
    r.store_txn_count = j.at("store_txn_count").get<std::size_t>();
    r.worker_count = j.at("worker_count").get<std::size_t>();
}

namespace {

struct Attempt {
    Micros start = -1;
    Micros end = -1;
    std::string worker;
    std::map<std::string, Micros> stages;
};

struct TaskTrace {
    bool finished = false;
    std::unordered_map<int, Attempt> attempts;
    int current = 1;
};

std::string stage_of(const Event& e) {
    if (e.kind == EventKind::store_txn) return "store";
    return e.meta.value("stage", std::string("other"));
}

}  // namespace

MetricsReport compute_metrics(const std::vector<Event>& all, const std::string& job_id, std::uint64_t pages_total,
                              core::TimeScale scale) {
    std::vector<Event> events;
    for (const auto& e : all) {
        if (e.task && e.task->job_id == job_id) events.push_back(e);
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.ts < b.ts; });

    MetricsReport r;
    r.job_id = job_id;
    r.pages_total = pages_total;
    const TaskId root = TaskId::root(job_id);

    std::optional<Micros> t0, root_end, td;
    std::map<TaskId, TaskTrace> tasks;
    std::vector<std::pair<Micros, int>> page_finishes;
    for (const auto& e : events) {
        const TaskId& id = *e.task;
        switch (e.kind) {
            case EventKind::job_submitted:
                if (!t0) t0 = e.ts;
                break;
            case EventKind::task_enqueued:
                tasks[id];
                break;
            case EventKind::task_started: {
                auto& t = tasks[id];
                t.current = e.meta.value("attempt", 1);
                auto& a = t.attempts[t.current];
                a.start = e.ts;
                a.worker = e.worker.value_or("");
                if (!id.is_root()) td = std::max(td.value_or(e.ts), e.ts);
                break;
            }
            case EventKind::task_finished: {
                auto& t = tasks[id];
                t.finished = true;
                auto& a = t.attempts[e.meta.value("attempt", t.current)];
                a.end = e.ts;
                if (a.worker.empty()) a.worker = e.worker.value_or("");
                if (id == root) root_end = e.ts;
                const std::string kind = e.meta.value("kind", std::string());
                if (e.meta.contains("pages") && (kind == pipeline::kDocumentKind || kind == pipeline::kExportKind)) {
                    page_finishes.emplace_back(e.ts, e.meta["pages"].get<int>());
                }
                break;
            }
            case EventKind::store_txn:
                ++r.store_txn_count;
                [[fallthrough]];
            case EventKind::compute:
            case EventKind::io_wait:
            case EventKind::infer_reply: {
                auto& t = tasks[id];
                t.attempts[t.current].stages[stage_of(e)] += e.meta.value("dur_us", Micros{0});
                break;
            }
            default:
                break;
        }
    }

    std::vector<std::string> missing;
    for (const auto& [id, t] : tasks) {
        if (!t.finished) missing.push_back(id.str());
    }
    if (!t0) missing.insert(missing.begin(), "job_submitted");
    if (!missing.empty()) {
        std::string msg = "event log of " + job_id + " lacks terminal events for:";
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
        if (missing.size() > 10) msg += " (+" + std::to_string(missing.size() - 10) + " more)";
        throw IncompleteLogError(msg, missing);
    }

    r.t0_us = *t0;
    r.task_count = tasks.size();
    const Micros end = root_end.value_or(*t0);
    const Micros drain = std::clamp(td.value_or(end), *t0, end);

    // Each worker runs out of work at its last finish, and not before the
    // queue drained.
    std::map<std::string, Micros> last_finish;
    Micros serial_us = 0;
    std::map<std::string, Micros> by_stage;
    for (const auto& [id, t] : tasks) {
        if (id == root) continue;
        for (const auto& [n, a] : t.attempts) {
            if (a.start < 0 || a.end < 0) continue;
            const Micros run = a.end - a.start;
            serial_us += run;
            Micros covered = 0;
            for (const auto& [stage, us] : a.stages) {
                by_stage[stage] += us;
                covered += us;
            }
            // Waiting for the lane or the loop: still part of the task runtime.
            by_stage["other"] += std::max<Micros>(0, run - covered);
            if (covered > run) by_stage["other"] -= covered - run;
            last_finish[a.worker] = std::max(last_finish[a.worker], a.end);
        }
    }
    Micros tw = end;
    for (const auto& [w, f] : last_finish) tw = std::min(tw, std::max(drain, f));
    tw = std::clamp(tw, drain, end);

    r.worker_count = last_finish.size();
    r.td_s = scale.to_sim_seconds(drain - *t0);
    r.tw_s = scale.to_sim_seconds(tw - *t0);
    r.tts_s = scale.to_sim_seconds(end - *t0);
    r.serial_time_s = scale.to_sim_seconds(serial_us);
    for (const auto& [stage, us] : by_stage) {
        if (us != 0) r.serial_time_by_stage[stage] = scale.to_sim_seconds(us);
    }
    const double pages = static_cast<double>(pages_total);
    if (r.tts_s > 0) r.effective_throughput = pages / r.tts_s;
    if (r.tw_s > 0) {
        r.sustained_throughput = pages / r.tw_s;
        std::uint64_t done = 0;
        for (const auto& [ts, p] : page_finishes) {
            if (ts <= tw) done += static_cast<std::uint64_t>(p);
        }
        r.sustained_completed_throughput = static_cast<double>(done) / r.tw_s;
    }
    if (r.serial_time_s > 0) {
        double ml = 0;
        for (const char* s : {"layout", "table"}) {
            if (auto it = r.serial_time_by_stage.find(s); it != r.serial_time_by_stage.end()) ml += it->second;
        }
        r.model_share = ml / r.serial_time_s;
    }
    return r;
}

bool metric_identities_hold(const MetricsReport& r) {
    constexpr double eps = 1e-9;
    return r.td_s >= -eps && r.td_s <= r.tw_s + eps && r.tw_s <= r.tts_s + eps &&
           r.effective_throughput <= r.sustained_throughput + eps;
}

}  // namespace convbench::bench
