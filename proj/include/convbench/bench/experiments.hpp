// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convbench/bench/cluster.hpp"

namespace convbench::bench {

struct ExperimentConfig {
    pipeline::Scheme scheme = pipeline::Scheme::document_level;
    DeploymentProfile profile = profile_b();
    ClusterOptions cluster{};
    pipeline::CostModel cost{};
    int batch_size = 4;
    bool dynamic_batching = false;
    /// Unset uses W = worker slots; `unbounded_window` disables windowing.
    std::optional<std::size_t> window;
    bool unbounded_window = false;
    /// Wall-clock limit per job.
    std::chrono::seconds job_timeout{600};
};

struct RunResult {
    int nodes = 0;
    Allocation allocation;
    MetricsReport metrics;
    json summary;  // the root task's result
};

/// One conversion job of `docs` on a fresh cluster of `nodes` nodes.
RunResult run_conversion(const std::vector<pipeline::SyntheticDocument>& docs, int nodes,
                         const ExperimentConfig& cfg);

struct ScalingResult {
    std::vector<RunResult> points;
    /// sustained(n) / sustained(first point), per point.
    std::vector<double> speedup;
};

/// Throws on a node list that is empty or not ascending, and when a point
/// has errored documents (task failures beyond the injected ones).
ScalingResult run_scaling_experiment(const std::vector<pipeline::SyntheticDocument>& docs,
                                     const std::vector<int>& node_counts, const ExperimentConfig& cfg);

struct FairnessResult {
    double idle_tts_s = 0;
    std::vector<double> busy_tts_s;  // one per offset
    double busy_mean_s = 0;
    double busy_stddev_s = 0;
    double ratio = 0;  // busy_mean / idle
};

/// Probe TTS on an idle cluster, then with `background` running and the probe
/// submitted at each offset (simulated seconds after the background job).
FairnessResult run_fairness_experiment(const std::vector<pipeline::SyntheticDocument>& background,
                                       const pipeline::SyntheticDocument& probe, const std::vector<double>& offsets_s,
                                       int nodes, const ExperimentConfig& cfg);

void to_json(json& j, const RunResult& r);
void to_json(json& j, const ScalingResult& r);
void to_json(json& j, const FairnessResult& r);

}  // namespace convbench::bench
