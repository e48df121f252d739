// SPDX-License-Identifier: Apache-2.0
#include "convbench/model/model.hpp"

#include "convbench/core/errors.hpp"
#include "convbench/core/event_log.hpp"
#include "convbench/model/layout.hpp"

namespace convbench::model {

void to_json(json& j, const InferRequest& r) {
    j = json{{"doc_id", r.doc_id}, {"page_no", r.page_no}, {"seed", r.seed}, {"want", r.want},
             {"complexity", r.complexity}, {"tables", r.tables}};
    if (r.want == "table") {
        j["layout"] = r.layout;
        j["text_cells"] = r.text_cells;
    }
}

void from_json(const json& j, InferRequest& r) {
    r.doc_id = j.at("doc_id").get<std::string>();
    r.page_no = j.at("page_no").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.want = j.value("want", std::string("layout"));
    if (r.want != "layout" && r.want != "table") throw InvalidArgumentError("want must be layout or table");
    r.complexity = j.value("complexity", 1.0);
    r.tables = j.value("tables", 0);
    r.layout = j.value("layout", json::array());
    r.text_cells = j.value("text_cells", 0);
}

void to_json(json& j, const InferReply& r) {
    j = json{{"regions", r.regions},
             {"duration_ms", r.duration_ms},
             {"replica", r.replica},
             {"service_start_us", r.service_start_us},
             {"service_end_us", r.service_end_us}};
}

void from_json(const json& j, InferReply& r) {
    r.regions = j.at("regions");
    r.duration_ms = j.at("duration_ms").get<double>();
    r.replica = j.value("replica", std::string());
    r.service_start_us = j.value("service_start_us", Micros{0});
    r.service_end_us = j.value("service_end_us", Micros{0});
}

void ModelEndpointConfig::validate() const {
    if (infer_duration_s < 0 || table_duration_s < 0) throw InvalidArgumentError("model durations must be >= 0");
    if (max_concurrent != 1) throw InvalidArgumentError("a replica serves exactly one request at a time");
    if (queue_bound && *queue_bound == 0) throw InvalidArgumentError("queue bound must be >= 1 when set");
}

double service_time_s(const ModelEndpointConfig& cfg, const InferRequest& req) {
    if (req.want == "table") return cfg.table_duration_s * count_table_regions(req.layout);
    return cfg.infer_duration_s * req.complexity;
}

LocalReplica::LocalReplica(ModelEndpointConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (int i = 0; i < cfg_.max_concurrent; ++i) lanes_.emplace_back([this] { lane(); });
}

LocalReplica::~LocalReplica() { shutdown(); }

void LocalReplica::shutdown() {
    {
        std::lock_guard lk(mu_);
        if (closed_) return;
        closed_ = true;
    }
    cv_.notify_all();
    for (auto& t : lanes_) t.join();
    for (auto& item : queue_) {
        item.reply.set_exception(std::make_exception_ptr(UnavailableError("replica shut down: " + cfg_.replica_id)));
    }
    queue_.clear();
}

InferReply LocalReplica::infer(const InferRequest& req) {
    std::future<InferReply> fut;
    {
        std::lock_guard lk(mu_);
        if (closed_) throw UnavailableError("replica shut down: " + cfg_.replica_id);
        if (cfg_.queue_bound && queue_.size() >= *cfg_.queue_bound) throw ModelBusyError(cfg_.replica_id);
        queue_.push_back(Item{req, {}});
        fut = queue_.back().reply.get_future();
    }
    cv_.notify_one();
    return fut.get();
}

void LocalReplica::lane() {
    for (;;) {
        Item item;
        {
            std::unique_lock lk(mu_);
            cv_.wait(lk, [this] { return closed_ || !queue_.empty(); });
            if (closed_) return;
            item = std::move(queue_.front());
            queue_.pop_front();
            ++in_service_;
        }
        try {
            const double sim_s = service_time_s(cfg_, item.req);
            InferReply reply;
            reply.replica = cfg_.replica_id;
            reply.service_start_us = core::now_us();
            const auto until = std::chrono::steady_clock::now() + cfg_.time_scale.to_real(sim_s);
            reply.regions = item.req.want == "table"
                                ? infer_table_structure(item.req.layout, item.req.text_cells, item.req.seed)
                                : generate_layout(item.req.seed, item.req.tables);
            std::this_thread::sleep_until(until);
            reply.service_end_us = core::now_us();
            reply.duration_ms = sim_s * 1000.0;
            finish_one();
            item.reply.set_value(std::move(reply));
        } catch (...) {
            finish_one();
            item.reply.set_exception(std::current_exception());
        }
    }
}

std::size_t LocalReplica::served() const {
    std::lock_guard lk(mu_);
    return served_;
}

void LocalReplica::finish_one() {
    std::lock_guard lk(mu_);
    ++served_;
    --in_service_;
}

std::size_t LocalReplica::in_service() const {
    std::lock_guard lk(mu_);
    return in_service_;
}

std::size_t LocalReplica::queued() const {
    std::lock_guard lk(mu_);
    return queue_.size();
}

}  // namespace convbench::model
