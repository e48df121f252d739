// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "convbench/core/time_scale.hpp"

namespace convbench::core {

struct StoreConfig {
    /// Simulated seconds each transaction takes once admitted.
    double latency_per_op_s = 0.05;
    /// Simulated transactions per simulated second; unset means unlimited.
    std::optional<double> capacity_ops_per_s;
    bool persistent = false;
    std::filesystem::path directory;

    void validate() const;
};

/// Keyed blob store standing in for the database / object storage. Every put
/// or get is one transaction and blocks for the modelled latency.
class BlobStore {
public:
    virtual ~BlobStore() = default;

    virtual void put(const std::string& key, std::string bytes) = 0;
    /// Throws NotFoundError for a missing key.
    virtual std::string get(const std::string& key) = 0;
    virtual std::uint64_t transactions() const = 0;
};

/// Admits transactions at the configured rate; later arrivals queue up.
class TransactionThrottle {
public:
    TransactionThrottle(const StoreConfig& config, TimeScale scale);

    /// Blocks until the transaction has been admitted and its latency elapsed.
    void pass();

private:
    std::chrono::nanoseconds latency_;
    std::optional<std::chrono::nanoseconds> spacing_;
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_free_{};
};

class LocalBlobStore final : public BlobStore {
public:
    LocalBlobStore(StoreConfig config, TimeScale scale);

    void put(const std::string& key, std::string bytes) override;
    std::string get(const std::string& key) override;
    std::uint64_t transactions() const override { return txns_.load(); }

    /// Writes without a transaction or latency; used to stage input datasets.
    void preload(const std::string& key, std::string bytes);
    bool contains(const std::string& key) const;
    /// Reads without a transaction; for inspection after a run.
    std::optional<std::string> peek(const std::string& key) const;

private:
    std::filesystem::path path_for(const std::string& key) const;
    void write(const std::string& key, std::string bytes);

    StoreConfig config_;
    TransactionThrottle throttle_;
    std::atomic<std::uint64_t> txns_{0};
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::string> blobs_;
};

}  // namespace convbench::core
