// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "convbench/core/time_scale.hpp"

namespace convbench::model {

using json = nlohmann::json;
using core::Micros;

struct InferRequest {
    std::string doc_id;
    int page_no = 1;
    std::uint64_t seed = 0;
    std::string want = "layout";  // "layout" | "table"
    double complexity = 1.0;
    int tables = 0;  // table regions the layout model will find
    /// want=table: layout regions to reconstruct and the page's text cell count.
    json layout;
    int text_cells = 0;
};

void to_json(json& j, const InferRequest& r);
void from_json(const json& j, InferRequest& r);

struct InferReply {
    json regions = json::array();
    double duration_ms = 0;  // simulated service time on the replica
    std::string replica;
    Micros service_start_us = 0;
    Micros service_end_us = 0;
};

void to_json(json& j, const InferReply& r);
void from_json(const json& j, InferReply& r);

/// Blocking inference call. Safe for concurrent callers.
class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual InferReply infer(const InferRequest& req) = 0;
};

struct ModelEndpointConfig {
    std::string replica_id = "model-0";
    double infer_duration_s = 3.0;
    double table_duration_s = 0.05;  // per table region
    int max_concurrent = 1;
    std::optional<std::size_t> queue_bound;  // waiting requests beyond this get a busy reply
    std::string host = "127.0.0.1";
    int port = 0;
    core::TimeScale time_scale{};

    void validate() const;
};

/// Simulated service time for `req` before time scaling.
double service_time_s(const ModelEndpointConfig& cfg, const InferRequest& req);

/// In-process replica: one service lane, excess requests wait FIFO.
class LocalReplica : public ModelClient {
public:
    explicit LocalReplica(ModelEndpointConfig cfg);
    ~LocalReplica() override;
    LocalReplica(const LocalReplica&) = delete;
    LocalReplica& operator=(const LocalReplica&) = delete;

    InferReply infer(const InferRequest& req) override;

    const ModelEndpointConfig& config() const { return cfg_; }
    std::size_t served() const;
    std::size_t queued() const;
    std::size_t in_service() const;
    void shutdown();

private:
    struct Item {
        InferRequest req;
        std::promise<InferReply> reply;
    };
    void lane();
    void finish_one();

    ModelEndpointConfig cfg_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Item> queue_;
    std::size_t served_ = 0;
    std::size_t in_service_ = 0;
    bool closed_ = false;
    std::vector<std::thread> lanes_;
};

}  // namespace convbench::model
