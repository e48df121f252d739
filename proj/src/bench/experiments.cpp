// SPDX-License-Identifier: Apache-2.0
#include "convbench/bench/experiments.hpp"

#include <cmath>
#include <numeric>
#include <thread>

namespace convbench::bench {

namespace {

pipeline::ConversionRequest request_for(const std::string& dataset, const ExperimentConfig& cfg) {
    pipeline::ConversionRequest req;
    req.dataset = dataset;
    req.scheme = cfg.scheme;
    req.batch_size = cfg.batch_size;
    req.dynamic_batching = cfg.dynamic_batching;
    req.cost = cfg.cost;
    req.window = cfg.window;
    req.unbounded_window = cfg.unbounded_window;
    return req;
}

void require_success(const core::TaskState& s) {
    if (s.status != core::TaskStatus::succeeded) {
        throw Error("experiment", "job " + s.id.job_id + " ended " + std::string(core::to_string(s.status)) + ": " +
                                      s.error.value_or(""));
    }
}

double probe_tts(Cluster& cluster, const ExperimentConfig& cfg) {
    const auto job = cluster.submit(request_for("probe", cfg));
    require_success(cluster.wait(job, cfg.job_timeout));
    return cluster.metrics(job).tts_s;
}

}  // namespace

RunResult run_conversion(const std::vector<pipeline::SyntheticDocument>& docs, int nodes, const ExperimentConfig& cfg) {
    Cluster cluster(cfg.profile, nodes, cfg.cluster, cfg.cost);
    cluster.add_dataset("corpus", docs);
    cluster.start();
    const auto job = cluster.submit(request_for("corpus", cfg));
    const auto state = cluster.wait(job, cfg.job_timeout);
    cluster.stop();
    require_success(state);
    return RunResult{nodes, cluster.allocation(), cluster.metrics(job), state.result};
}

ScalingResult run_scaling_experiment(const std::vector<pipeline::SyntheticDocument>& docs,
                                     const std::vector<int>& node_counts, const ExperimentConfig& cfg) {
    if (node_counts.empty()) throw InvalidArgumentError("node_counts is empty");
    for (std::size_t i = 1; i < node_counts.size(); ++i) {
        if (node_counts[i] <= node_counts[i - 1]) throw InvalidArgumentError("node_counts must be ascending");
    }
    ScalingResult out;
    for (int n : node_counts) {
        RunResult r = run_conversion(docs, n, cfg);
        if (r.summary.value("errored", 0) != 0) {
            throw Error("experiment", std::to_string(n) + " nodes: " + r.summary.dump());
        }
        out.points.push_back(std::move(r));
    }
    const double base = out.points.front().metrics.sustained_throughput;
    for (const auto& p : out.points) out.speedup.push_back(base > 0 ? p.metrics.sustained_throughput / base : 0.0);
    return out;
}

FairnessResult run_fairness_experiment(const std::vector<pipeline::SyntheticDocument>& background,
                                       const pipeline::SyntheticDocument& probe, const std::vector<double>& offsets_s,
                                       int nodes, const ExperimentConfig& cfg) {
    if (offsets_s.empty()) throw InvalidArgumentError("offsets are empty");
    FairnessResult out;
    {
        Cluster idle(cfg.profile, nodes, cfg.cluster, cfg.cost);
        idle.add_dataset("probe", {probe});
        idle.start();
        out.idle_tts_s = probe_tts(idle, cfg);
    }
    for (double offset : offsets_s) {
        Cluster busy(cfg.profile, nodes, cfg.cluster, cfg.cost);
        busy.add_dataset("probe", {probe});
        busy.add_dataset("background", background);
        busy.start();
        busy.submit(request_for("background", cfg));
        std::this_thread::sleep_for(busy.time_scale().to_real(offset));
        out.busy_tts_s.push_back(probe_tts(busy, cfg));
        // The background job is abandoned; the cluster is torn down here.
    }
    const double n = static_cast<double>(out.busy_tts_s.size());
    out.busy_mean_s = std::accumulate(out.busy_tts_s.begin(), out.busy_tts_s.end(), 0.0) / n;
    double var = 0;
    for (double t : out.busy_tts_s) var += (t - out.busy_mean_s) * (t - out.busy_mean_s);
    out.busy_stddev_s = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    out.ratio = out.idle_tts_s > 0 ? out.busy_mean_s / out.idle_tts_s : 0.0;
    return out;
}

void to_json(json& j, const RunResult& r) {
    j = json{{"nodes", r.nodes}, {"allocation", r.allocation}, {"metrics", r.metrics}, {"summary", r.summary}};
}

void to_json(json& j, const ScalingResult& r) { j = json{{"points", r.points}, {"speedup", r.speedup}}; }

void to_json(json& j, const FairnessResult& r) {
    j = json{{"idle_tts_s", r.idle_tts_s},
             {"busy_tts_s", r.busy_tts_s},
             {"busy_mean_s", r.busy_mean_s},
             {"busy_stddev_s", r.busy_stddev_s},
             {"ratio", r.ratio}};
}

}  // namespace convbench::bench
