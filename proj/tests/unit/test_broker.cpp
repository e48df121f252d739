// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <mutex>
#include <thread>

#include "convbench/core/broker.hpp"
#include "convbench/core/errors.hpp"

using namespace convbench;
using namespace convbench::core;

namespace {
Task make(int n) { return Task{TaskId{"j", "0." + std::to_string(n)}, "noop"}; }
}  // namespace

TEST_CASE("fetch returns tasks in enqueue order") {
    InMemoryBroker broker;
    broker.enqueue(make(1));
    broker.enqueue(make(2));
    auto got = broker.fetch("w", 2);
    REQUIRE(got.size() == 2);
    CHECK(got[0].id == make(1).id);
    CHECK(got[1].id == make(2).id);
}

TEST_CASE("duplicate ids are rejected") {
    InMemoryBroker broker;
    broker.enqueue(make(1));
    CHECK_THROWS_AS(broker.enqueue(make(1)), DuplicateTaskError);
    // Still rejected after the first copy was consumed and acknowledged.
    auto got = broker.fetch("w", 1);
    broker.ack("w", got[0].id);
    CHECK_THROWS_AS(broker.enqueue(make(1)), DuplicateTaskError);
}

TEST_CASE("bounded queue signals backpressure") {
    InMemoryBroker broker(BrokerConfig{2});
    broker.enqueue(make(1));
    broker.enqueue(make(2));
    CHECK_THROWS_AS(broker.enqueue(make(3)), QueueFullError);
    (void)broker.fetch("w", 1);
    broker.enqueue(make(3));
}

TEST_CASE("empty queue fetch is non-blocking and empty") {
    InMemoryBroker broker;
    CHECK(broker.fetch("w", 1).empty());
}

TEST_CASE("100 tasks, two competing consumers: each delivered exactly once") {
    InMemoryBroker broker;
    std::vector<TaskId> enqueued;
    for (int i = 0; i < 100; ++i) {
        broker.enqueue(make(i));
        enqueued.push_back(make(i).id);
    }
    std::mutex mu;
    std::vector<TaskId> delivered;
    auto consume = [&](const std::string& worker) {
        for (;;) {
            auto got = broker.fetch(worker, 1);
            if (got.empty()) return;
            broker.ack(worker, got[0].id);
            std::lock_guard lock(mu);
            delivered.push_back(got[0].id);
        }
    };
    std::thread a(consume, "a");
    std::thread b(consume, "b");
    a.join();
    b.join();
    std::sort(delivered.begin(), delivered.end());
    std::sort(enqueued.begin(), enqueued.end());
    CHECK(delivered == enqueued);
    CHECK(broker.in_flight() == 0);
}

TEST_CASE("unacknowledged lease is redelivered with a higher attempt") {
    BrokerConfig cfg;
    cfg.visibility_timeout_s = 1.0;
    cfg.time_scale = TimeScale{100.0};  // 10 ms wall clock
    InMemoryBroker broker(cfg);
    broker.enqueue(make(1));
    auto first = broker.fetch("dead", 1);
    REQUIRE(first.size() == 1);
    CHECK(broker.fetch("alive", 1).empty());
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    auto again = broker.fetch("alive", 1);
    REQUIRE(again.size() == 1);
    CHECK(again[0].attempt == 2);
    CHECK_THROWS_AS(broker.ack("dead", again[0].id), NotFoundError);
    broker.ack("alive", again[0].id);
}

TEST_CASE("heartbeats keep a lease alive") {
    BrokerConfig cfg;
    cfg.visibility_timeout_s = 1.0;
    cfg.time_scale = TimeScale{100.0};
    InMemoryBroker broker(cfg);
    broker.enqueue(make(1));
    (void)broker.fetch("w", 1);
    for (int i = 0; i < 5; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        broker.heartbeat("w");
    }
    CHECK(broker.redeliver_expired() == 0);
    CHECK(broker.in_flight() == 1);
}

TEST_CASE("nack with requeue puts the task back at the front") {
    InMemoryBroker broker;
    broker.enqueue(make(1));
    broker.enqueue(make(2));
    auto got = broker.fetch("w", 1);
    broker.nack("w", got[0].id, true);
    auto again = broker.fetch("w", 1);
    CHECK(again[0].id == make(1).id);
    CHECK(again[0].attempt == 2);
}
