// SPDX-License-Identifier: Apache-2.0
#include "convbench/model/router.hpp"

#include <algorithm>
#include <thread>

#include "convbench/core/errors.hpp"

namespace convbench::model {

std::string to_string(RoutingPolicy p) {
    switch (p) {
        case RoutingPolicy::round_robin: return "round_robin";
        case RoutingPolicy::random: return "random";
        case RoutingPolicy::least_loaded: return "least_loaded";
    }
    return "round_robin";
}

RoutingPolicy parse_policy(const std::string& s) {
    if (s == "round_robin") return RoutingPolicy::round_robin;
    if (s == "random") return RoutingPolicy::random;
    if (s == "least_loaded") return RoutingPolicy::least_loaded;
    throw InvalidArgumentError("unknown routing policy: " + s);
}

Router::Router(RouterPolicy policy) : policy_(policy), rng_(policy.seed) {}

std::size_t Router::route(std::size_t replicas) {
    std::vector<std::size_t> zeros(replicas, 0);
    return route(zeros);
}

std::size_t Router::route(std::span<const std::size_t> in_flight) {
    const std::size_t n = in_flight.size();
    if (n == 0) throw UnavailableError("no model replicas");
    switch (policy_.policy) {
        case RoutingPolicy::round_robin: return counter_.fetch_add(1) % n;
        case RoutingPolicy::random: {
            std::lock_guard lk(rng_mu_);
            return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
        }
        case RoutingPolicy::least_loaded: {
            // Ties rotate so an idle pool is still visited round-robin.
            const std::size_t start = counter_.fetch_add(1) % n;
            std::size_t best = start;
            for (std::size_t k = 1; k < n; ++k) {
                const std::size_t i = (start + k) % n;
                if (in_flight[i] < in_flight[best]) best = i;
            }
            return best;
        }
    }
    return 0;
}

double Router::next_jitter() {
    if (!policy_.jitter_s || *policy_.jitter_s <= 0) return 0.0;
    std::lock_guard lk(rng_mu_);
    return std::uniform_real_distribution<double>(0.0, *policy_.jitter_s)(rng_);
}

RoutedModelClient::RoutedModelClient(std::vector<std::shared_ptr<ModelClient>> replicas, RouterPolicy policy,
                                     core::TimeScale scale)
    : replicas_(std::move(replicas)),
      router_(policy),
      scale_(scale),
      in_flight_(new std::atomic<std::size_t>[replicas_.size()]),
      dispatched_(new std::atomic<std::size_t>[replicas_.size()]) {
    for (std::size_t i = 0; i < replicas_.size(); ++i) {
        in_flight_[i] = 0;
        dispatched_[i] = 0;
    }
}

InferReply RoutedModelClient::infer(const InferRequest& req) {
    std::vector<std::size_t> loads(replicas_.size());
    for (std::size_t i = 0; i < loads.size(); ++i) loads[i] = in_flight_[i].load();
    const std::size_t pick = router_.route(loads);
    if (const double j = router_.next_jitter(); j > 0) std::this_thread::sleep_for(scale_.to_real(j));
    ++in_flight_[pick];
    ++dispatched_[pick];
    struct Done {
        std::atomic<std::size_t>& n;
        ~Done() { --n; }
    } done{in_flight_[pick]};
    return replicas_[pick]->infer(req);
}

std::vector<std::size_t> RoutedModelClient::dispatched() const {
    std::vector<std::size_t> out(replicas_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dispatched_[i].load();
    return out;
}

}  // namespace convbench::model
