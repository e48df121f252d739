// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "convbench/bench/metrics.hpp"
#include "convbench/bench/planner.hpp"
#include "convbench/core/worker.hpp"
#include "convbench/model/router.hpp"
#include "convbench/pipeline/job.hpp"

namespace convbench::bench {

struct ClusterOptions {
    double time_scale = 100.0;
    /// Store transactions per simulated second; unset is uncapped.
    std::optional<double> store_capacity_ops_per_s;
    std::optional<int> restart_after_tasks = 64;
    double restart_delay_s = 10.0;
    model::RouterPolicy router{};
    /// Overrides the planner.
    std::optional<int> workers_per_node;
    NodeSpec node{};
    double headroom = kDefaultHeadroom;
    double visibility_timeout_s = 30.0;

    void validate() const;
};

/// In-process emulation of `nodes` nodes: each gets the profile's workers and
/// model replicas, and its workers route to their own node's replicas.
class Cluster {
public:
    Cluster(DeploymentProfile profile, int nodes, ClusterOptions options, pipeline::CostModel cost = {});
    ~Cluster();
    Cluster(const Cluster&) = delete;
    Cluster& operator=(const Cluster&) = delete;

    void start();
    void stop();

    /// Registers a dataset and stages its inputs in the store.
    void add_dataset(const std::string& name, const std::vector<pipeline::SyntheticDocument>& docs);

    /// Submits with the default window W = total worker slots.
    std::string submit(pipeline::ConversionRequest req);
    core::TaskState wait(const std::string& job_id, std::chrono::milliseconds timeout);
    MetricsReport metrics(const std::string& job_id) const;

    const Allocation& allocation() const { return allocation_; }
    std::size_t worker_slots() const;
    const DeploymentProfile& profile() const { return profile_; }
    const ClusterOptions& options() const { return options_; }
    core::TimeScale time_scale() const { return scale_; }
    std::shared_ptr<core::EventLog> events() const { return events_; }
    std::shared_ptr<core::LocalBlobStore> store() const { return store_; }
    std::shared_ptr<core::InMemoryBroker> broker() const { return broker_; }
    const pipeline::DatasetCatalog& catalog() const { return catalog_; }
    const std::vector<std::shared_ptr<model::LocalReplica>>& replicas() const { return replicas_; }

private:
    DeploymentProfile profile_;
    ClusterOptions options_;
    pipeline::CostModel cost_;
    Allocation allocation_;
    core::TimeScale scale_;
    std::shared_ptr<core::InMemoryBroker> broker_;
    std::shared_ptr<core::InMemoryResultBackend> backend_;
    std::shared_ptr<core::LocalBlobStore> store_;
    std::shared_ptr<core::EventLog> events_;
    std::vector<std::shared_ptr<model::LocalReplica>> replicas_;
    std::vector<std::shared_ptr<core::HandlerRegistry>> registries_;
    std::vector<std::unique_ptr<core::Worker>> workers_;
    pipeline::DatasetCatalog catalog_;
    std::unique_ptr<core::Client> client_;
    bool started_ = false;
};

}  // namespace convbench::bench
