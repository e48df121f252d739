// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/broker.hpp"

#include <algorithm>

#include "convbench/core/errors.hpp"

namespace convbench::core {

InMemoryBroker::InMemoryBroker(BrokerConfig config)
    : config_(config), visibility_us_(config.time_scale.to_real_us(config.visibility_timeout_s)) {}

void InMemoryBroker::enqueue(const Task& task, const std::string& queue) {
    std::lock_guard lock(mu_);
    if (known_.contains(task.id)) throw DuplicateTaskError(task.id.str());
    auto& q = queues_[queue];
    if (config_.max_depth != 0 && q.size() >= config_.max_depth) throw QueueFullError(queue);
    known_.insert(task.id);
    q.push_back(task);
}

std::vector<Task> InMemoryBroker::fetch(const std::string& worker_id, std::size_t limit,
                                        const std::string& queue) {
    std::vector<Task> out;
    const Micros now = now_us();
    std::lock_guard lock(mu_);
    redeliver_expired_locked(now);
    auto& q = queues_[queue];
    while (out.size() < limit && !q.empty()) {
        Task t = std::move(q.front());
        q.pop_front();
        leases_[t.id] = Lease{t, queue, worker_id, now + visibility_us_};
        out.push_back(std::move(t));
    }
    return out;
}

void InMemoryBroker::ack(const std::string& worker_id, const TaskId& id) {
    std::lock_guard lock(mu_);
    auto it = leases_.find(id);
    if (it == leases_.end()) throw NotFoundError("no lease for task " + id.str());
    if (it->second.worker != worker_id) throw NotFoundError("task " + id.str() + " is leased to another worker");
    leases_.erase(it);
}

void InMemoryBroker::nack(const std::string& worker_id, const TaskId& id, bool requeue) {
    std::lock_guard lock(mu_);
    auto it = leases_.find(id);
    if (it == leases_.end() || it->second.worker != worker_id) {
        throw NotFoundError("no lease for task " + id.str());
    }
    if (requeue) {
        Task t = std::move(it->second.task);
        ++t.attempt;
        queues_[it->second.queue].push_front(std::move(t));
    }
    leases_.erase(it);
}

void InMemoryBroker::heartbeat(const std::string& worker_id) {
    const Micros deadline = now_us() + visibility_us_;
    std::lock_guard lock(mu_);
    for (auto& [id, lease] : leases_) {
        if (lease.worker == worker_id) lease.deadline = deadline;
    }
}

std::size_t InMemoryBroker::depth(const std::string& queue) {
    std::lock_guard lock(mu_);
    auto it = queues_.find(queue);
    return it == queues_.end() ? 0 : it->second.size();
}

std::size_t InMemoryBroker::redeliver_expired() {
    std::lock_guard lock(mu_);
    return redeliver_expired_locked(now_us());
}

std::size_t InMemoryBroker::in_flight() const {
    std::lock_guard lock(mu_);
    return leases_.size();
}

std::size_t InMemoryBroker::redeliver_expired_locked(Micros now) {
    std::vector<TaskId> expired;
    for (const auto& [id, lease] : leases_) {
        if (lease.deadline <= now) expired.push_back(id);
    }
    // Oldest-created first so redelivery keeps the original relative order.
    std::sort(expired.begin(), expired.end(), [this](const TaskId& a, const TaskId& b) {
        return leases_.at(a).task.created_at > leases_.at(b).task.created_at;
    });
    for (const auto& id : expired) {
        auto node = leases_.extract(id);
        Task t = std::move(node.mapped().task);
        ++t.attempt;
        queues_[node.mapped().queue].push_front(std::move(t));
    }
    return expired.size();
}

}  // namespace convbench::core
