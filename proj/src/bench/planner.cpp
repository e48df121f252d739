// SPDX-License-Identifier: Apache-2.0
#include "convbench/bench/planner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "convbench/core/errors.hpp"

namespace convbench::bench {

void DeploymentProfile::validate() const {
    if (worker_model_ratio < 0) throw InvalidArgumentError("worker_model_ratio must be >= 0");
    if (concurrency < 1) throw InvalidArgumentError("concurrency must be >= 1");
    if (worker_mem_mb <= 0 || model_mem_mb < 0 || worker_cpu <= 0 || model_cpu < 0) {
        throw InvalidArgumentError("profile " + name + ": resource figures must be positive");
    }
}

DeploymentProfile profile_a() { return DeploymentProfile{"A", 1, 1, 450, 500, 0.4, 0.7}; }
DeploymentProfile profile_b() { return DeploymentProfile{"B", 4, 4, 700, 500, 1.2, 0.7}; }

DeploymentProfile profile_by_name(const std::string& name) {
    std::string n = name;
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::toupper(c); });
    if (n == "A") return profile_a();
    if (n == "B") return profile_b();
    throw InvalidArgumentError("unknown profile: " + name);
}

void NodeSpec::validate() const {
    if (!(cores > 0) || !(mem_mb > 0) || !(mem_target_fraction > 0) || mem_target_fraction > 1) {
        throw InvalidArgumentError("node spec must be positive with mem_target_fraction in (0, 1]");
    }
}

Allocation plan_deployment(const DeploymentProfile& profile, const NodeSpec& node, int n_nodes, double headroom) {
    profile.validate();
    node.validate();
    if (n_nodes < 1) throw InvalidArgumentError("n_nodes must be >= 1");
    if (!(headroom > 0) || headroom > 1) throw InvalidArgumentError("headroom must be in (0, 1]");
    const double mem_per_worker = profile.worker_mem_mb + profile.worker_model_ratio * profile.model_mem_mb;
    const double cpu_per_worker = profile.worker_cpu + profile.worker_model_ratio * profile.model_cpu;
    const double budget = headroom * node.mem_target_fraction * node.mem_mb;
    const int by_mem = static_cast<int>(std::floor(budget / mem_per_worker));
    const int by_cpu = static_cast<int>(std::floor(node.cores / cpu_per_worker));
    const int w = std::min(by_mem, by_cpu);
    if (w < 1) throw InvalidArgumentError("profile " + profile.name + " does not fit on the node");
    return Allocation{w, w * profile.worker_model_ratio, n_nodes};
}

void to_json(nlohmann::json& j, const DeploymentProfile& p) {
    j = nlohmann::json{{"name", p.name},
                       {"worker_model_ratio", p.worker_model_ratio},
                       {"concurrency", p.concurrency},
                       {"worker_mem_mb", p.worker_mem_mb},
                       {"model_mem_mb", p.model_mem_mb},
                       {"worker_cpu", p.worker_cpu},
                       {"model_cpu", p.model_cpu}};
}

void to_json(nlohmann::json& j, const Allocation& a) {
    j = nlohmann::json{{"nodes", a.nodes},
                       {"workers_per_node", a.workers_per_node},
                       {"models_per_node", a.models_per_node},
                       {"workers", a.workers()},
                       {"models", a.models()}};
}

}  // namespace convbench::bench
