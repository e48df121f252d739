// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "convbench/model/model.hpp"

namespace convbench::model {

enum class RoutingPolicy { round_robin, random, least_loaded };

std::string to_string(RoutingPolicy p);
RoutingPolicy parse_policy(const std::string& s);

struct RouterPolicy {
    RoutingPolicy policy = RoutingPolicy::round_robin;
    /// Extra uniform [0, jitter] sim seconds before a request is sent.
    std::optional<double> jitter_s;
    std::uint64_t seed = 7;
};

/// Picks a replica index. `in_flight[i]` is only read by least_loaded.
class Router {
public:
    explicit Router(RouterPolicy policy);

    std::size_t route(std::span<const std::size_t> in_flight);
    std::size_t route(std::size_t replicas);
    /// Sim seconds of injected delay for the next request (0 without jitter).
    double next_jitter();

    const RouterPolicy& policy() const { return policy_; }

private:
    RouterPolicy policy_;
    std::atomic<std::uint64_t> counter_{0};
    std::mutex rng_mu_;
    std::mt19937_64 rng_;
};

/// Spreads requests over a fixed replica set.
class RoutedModelClient : public ModelClient {
public:
    RoutedModelClient(std::vector<std::shared_ptr<ModelClient>> replicas, RouterPolicy policy,
                      core::TimeScale scale = {});

    InferReply infer(const InferRequest& req) override;

    std::size_t replica_count() const { return replicas_.size(); }
    std::vector<std::size_t> dispatched() const;

private:
    std::vector<std::shared_ptr<ModelClient>> replicas_;
    Router router_;
    core::TimeScale scale_;
    std::unique_ptr<std::atomic<std::size_t>[]> in_flight_;
    std::unique_ptr<std::atomic<std::size_t>[]> dispatched_;
};

}  // namespace convbench::model
