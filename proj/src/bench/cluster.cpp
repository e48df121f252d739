// SPDX-License-Identifier: Apache-2.0
#include "convbench/bench/cluster.hpp"

namespace convbench::bench {

using namespace convbench::core;

void ClusterOptions::validate() const {
    if (!(time_scale > 0)) throw InvalidArgumentError("time_scale must be positive");
    if (store_capacity_ops_per_s && !(*store_capacity_ops_per_s > 0)) {
        throw InvalidArgumentError("store capacity must be positive");
    }
    if (workers_per_node && *workers_per_node < 1) throw InvalidArgumentError("workers_per_node must be >= 1");
    if (restart_delay_s < 0) throw InvalidArgumentError("restart_delay_s must be >= 0");
    node.validate();
}

Cluster::Cluster(DeploymentProfile profile, int nodes, ClusterOptions options, pipeline::CostModel cost)
    : profile_(std::move(profile)), options_(std::move(options)), cost_(cost) {
    options_.validate();
    cost_.validate();
    allocation_ = plan_deployment(profile_, options_.node, nodes, options_.headroom);
    if (options_.workers_per_node) {
        allocation_.workers_per_node = *options_.workers_per_node;
        allocation_.models_per_node = *options_.workers_per_node * profile_.worker_model_ratio;
    }
    scale_ = TimeScale{options_.time_scale};

    BrokerConfig bc;
    bc.visibility_timeout_s = options_.visibility_timeout_s;
    bc.time_scale = scale_;
    broker_ = std::make_shared<InMemoryBroker>(bc);
    backend_ = std::make_shared<InMemoryResultBackend>();
    StoreConfig sc;
    sc.latency_per_op_s = cost_.store_latency;
    sc.capacity_ops_per_s = options_.store_capacity_ops_per_s;
    store_ = std::make_shared<LocalBlobStore>(sc, scale_);
    events_ = std::make_shared<EventLog>();

    for (int n = 0; n < allocation_.nodes; ++n) {
        std::vector<std::shared_ptr<model::ModelClient>> node_models;
        for (int m = 0; m < allocation_.models_per_node; ++m) {
            model::ModelEndpointConfig mc;
            mc.replica_id = "n" + std::to_string(n) + "-m" + std::to_string(m);
            mc.infer_duration_s = cost_.infer_layout_per_page;
            mc.table_duration_s = cost_.table_structure_per_table;
            mc.time_scale = scale_;
            auto r = std::make_shared<model::LocalReplica>(mc);
            replicas_.push_back(r);
            node_models.push_back(r);
        }
        if (node_models.empty()) throw InvalidArgumentError("a node needs at least one model replica");
        auto policy = options_.router;
        policy.seed += static_cast<std::uint64_t>(n);
        auto router = std::make_shared<model::RoutedModelClient>(node_models, policy, scale_);
        auto registry = std::make_shared<HandlerRegistry>();
        pipeline::register_pipeline_handlers(*registry, pipeline::PipelineServices{router});
        registries_.push_back(registry);
        for (int w = 0; w < allocation_.workers_per_node; ++w) {
            WorkerConfig wc;
            wc.worker_id = "n" + std::to_string(n) + "-w" + std::to_string(w);
            wc.prefetch_limit = profile_.concurrency;
            wc.restart_after_tasks = options_.restart_after_tasks;
            wc.restart_delay_s = options_.restart_delay_s;
            workers_.push_back(std::make_unique<Worker>(
                wc, WorkerEnv{broker_, backend_, store_, events_, registry, scale_}));
        }
    }
    client_ = std::make_unique<Client>(WorkerEnv{broker_, backend_, store_, events_, registries_.front(), scale_});
}

Cluster::~Cluster() { stop(); }

void Cluster::start() {
    if (started_) return;
    started_ = true;
    for (auto& w : workers_) w->start();
}

void Cluster::stop() {
    for (auto& w : workers_) w->stop();
    for (auto& r : replicas_) r->shutdown();
}

void Cluster::add_dataset(const std::string& name, const std::vector<pipeline::SyntheticDocument>& docs) {
    catalog_.add(name, docs, [this](const std::string& key, std::string bytes) { store_->preload(key, std::move(bytes)); });
}

std::size_t Cluster::worker_slots() const {
    return static_cast<std::size_t>(allocation_.workers()) * static_cast<std::size_t>(profile_.concurrency);
}

std::string Cluster::submit(pipeline::ConversionRequest req) {
    return pipeline::submit_job(*client_, catalog_, req, worker_slots());
}

TaskState Cluster::wait(const std::string& job_id, std::chrono::milliseconds timeout) {
    auto s = client_->wait(job_id, timeout, std::chrono::microseconds(200));
    if (!s || !is_terminal(s->status)) throw Error("timeout", "job " + job_id + " did not finish in time");
    return *s;
}

MetricsReport Cluster::metrics(const std::string& job_id) const {
    std::uint64_t pages = 0;
    for (const auto& e : events_->for_job(job_id)) {
        if (e.kind == EventKind::job_submitted) pages = e.meta.value("pages", std::uint64_t{0});
    }
    return compute_metrics(events_->snapshot(), job_id, pages, scale_);
}

}  // namespace convbench::bench
