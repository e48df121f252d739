// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace convbench::bench {

struct DeploymentProfile {
    std::string name;
    int worker_model_ratio = 1;  // model replicas per worker
    int concurrency = 1;         // X
    double worker_mem_mb = 0;
    double model_mem_mb = 0;
    double worker_cpu = 0;
    double model_cpu = 0;

    void validate() const;
};

/// Resource figures measured for the two production deployments.
DeploymentProfile profile_a();
DeploymentProfile profile_b();
/// "A" or "B", case insensitive.
DeploymentProfile profile_by_name(const std::string& name);

struct NodeSpec {
    double cores = 16;
    double mem_mb = 16384;
    double mem_target_fraction = 0.75;

    void validate() const;
};

struct Allocation {
    int workers_per_node = 0;
    int models_per_node = 0;
    int nodes = 0;
    int workers() const { return workers_per_node * nodes; }
    int models() const { return models_per_node * nodes; }
    bool operator==(const Allocation&) const = default;
};

/// Fraction of the memory target actually planned; pods need slack for
/// request spikes, and 0.7 reproduces the observed pod counts.
inline constexpr double kDefaultHeadroom = 0.7;

/// Worker/model counts fitting `node`'s memory target and cores, times n_nodes.
/// Throws InvalidArgumentError when not even one worker and its models fit.
Allocation plan_deployment(const DeploymentProfile& profile, const NodeSpec& node, int n_nodes,
                           double headroom = kDefaultHeadroom);

void to_json(nlohmann::json& j, const DeploymentProfile& p);
void to_json(nlohmann::json& j, const Allocation& a);

}  // namespace convbench::bench
