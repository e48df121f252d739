// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <thread>
#include <vector>

#include "convbench/core/blob_store.hpp"
#include "convbench/core/errors.hpp"

using namespace convbench;
using namespace convbench::core;

TEST_CASE("store then load returns identical bytes") {
    LocalBlobStore store(StoreConfig{0.0}, TimeScale{100.0});
    std::string bytes("\0\x01\xff payload", 11);
    store.put("job-1/x", bytes);
    CHECK(store.get("job-1/x") == bytes);
    CHECK(store.transactions() == 2);
}

TEST_CASE("missing key is not found and still counts as a transaction") {
    LocalBlobStore store(StoreConfig{0.0}, TimeScale{100.0});
    CHECK_THROWS_AS(store.get("nope"), NotFoundError);
    CHECK(store.transactions() == 1);
}

TEST_CASE("preloaded blobs cost no transaction") {
    LocalBlobStore store(StoreConfig{0.0}, TimeScale{100.0});
    store.preload("datasets/d/doc", "pdf");
    CHECK(store.transactions() == 0);
    CHECK(store.contains("datasets/d/doc"));
}

TEST_CASE("latency is observed per transaction") {
    LocalBlobStore store(StoreConfig{0.5}, TimeScale{100.0});  // 5 ms wall clock
    const auto t0 = std::chrono::steady_clock::now();
    store.put("k", "v");
    (void)store.get("k");
    CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(10));
}

TEST_CASE("capacity cap queues concurrent transactions") {
    StoreConfig cfg{0.0};
    cfg.capacity_ops_per_s = 10.0;  // 0.1 sim s spacing == 1 ms wall clock at scale 100
    LocalBlobStore store(cfg, TimeScale{100.0});
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&store, i] {
            for (int j = 0; j < 5; ++j) store.put("k" + std::to_string(i) + "_" + std::to_string(j), "v");
        });
    }
    for (auto& t : threads) t.join();
    // 20 admissions spaced 1 ms apart.
    CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(19));
    CHECK(store.transactions() == 20);
}

TEST_CASE("file-backed store persists across instances") {
    const auto dir = std::filesystem::temp_directory_path() / "convbench_store_test";
    std::filesystem::remove_all(dir);
    StoreConfig cfg{0.0};
    cfg.persistent = true;
    cfg.directory = dir;
    {
        LocalBlobStore store(cfg, TimeScale{100.0});
        store.put("job-1/out/doc.json", "{}");
    }
    LocalBlobStore reopened(cfg, TimeScale{100.0});
    CHECK(reopened.get("job-1/out/doc.json") == "{}");
    std::filesystem::remove_all(dir);
}

TEST_CASE("invalid store config is rejected") {
    StoreConfig bad{-1.0};
    CHECK_THROWS_AS(bad.validate(), InvalidArgumentError);
    StoreConfig zero_cap{0.0};
    zero_cap.capacity_ops_per_s = 0.0;
    CHECK_THROWS_AS(zero_cap.validate(), InvalidArgumentError);
}
