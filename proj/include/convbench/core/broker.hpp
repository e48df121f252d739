// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "convbench/core/task.hpp"
#include "convbench/core/time_scale.hpp"

namespace convbench::core {

inline constexpr const char* kDefaultQueue = "default";

/// Task queue with competitive consumption. Fetched tasks stay leased to the
/// fetching worker until acknowledged; leases held by a worker that stops
/// heartbeating are redelivered.
class Broker {
public:
    virtual ~Broker() = default;

    /// Throws DuplicateTaskError or QueueFullError.
    virtual void enqueue(const Task& task, const std::string& queue = kDefaultQueue) = 0;
    /// Non-blocking: returns at most `limit` tasks, possibly none.
    virtual std::vector<Task> fetch(const std::string& worker_id, std::size_t limit,
                                    const std::string& queue = kDefaultQueue) = 0;
    virtual void ack(const std::string& worker_id, const TaskId& id) = 0;
    virtual void nack(const std::string& worker_id, const TaskId& id, bool requeue) = 0;
    virtual void heartbeat(const std::string& worker_id) = 0;
    virtual std::size_t depth(const std::string& queue = kDefaultQueue) = 0;
};

struct BrokerConfig {
    /// Zero means unbounded.
    std::size_t max_depth = 0;
    /// Simulated seconds a lease survives without a heartbeat.
    double visibility_timeout_s = 30.0;
    TimeScale time_scale{};
};

class InMemoryBroker final : public Broker {
public:
    explicit InMemoryBroker(BrokerConfig config = {});

    void enqueue(const Task& task, const std::string& queue = kDefaultQueue) override;
    std::vector<Task> fetch(const std::string& worker_id, std::size_t limit,
                            const std::string& queue = kDefaultQueue) override;
    void ack(const std::string& worker_id, const TaskId& id) override;
    void nack(const std::string& worker_id, const TaskId& id, bool requeue) override;
    void heartbeat(const std::string& worker_id) override;
    std::size_t depth(const std::string& queue = kDefaultQueue) override;

    /// Requeues (at the front, attempt + 1) every lease past its deadline.
    /// Returns how many were redelivered.
    std::size_t redeliver_expired();
    std::size_t in_flight() const;

private:
    struct Lease {
        Task task;
        std::string queue;
        std::string worker;
        Micros deadline;
    };

    std::size_t redeliver_expired_locked(Micros now);

    BrokerConfig config_;
    Micros visibility_us_;
    mutable std::mutex mu_;
    std::map<std::string, std::deque<Task>> queues_;
    std::unordered_map<TaskId, Lease> leases_;
    std::unordered_set<TaskId> known_;
};

}  // namespace convbench::core
