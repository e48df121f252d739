// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/blob_store.hpp"

#include <fstream>
#include <iterator>
#include <thread>

#include "convbench/core/errors.hpp"

namespace convbench::core {

void StoreConfig::validate() const {
    if (latency_per_op_s < 0) throw InvalidArgumentError("store latency must be >= 0");
    if (capacity_ops_per_s && *capacity_ops_per_s <= 0) {
        throw InvalidArgumentError("store capacity must be > 0 when set");
    }
    if (persistent && directory.empty()) throw InvalidArgumentError("persistent store needs a directory");
}

TransactionThrottle::TransactionThrottle(const StoreConfig& config, TimeScale scale)
    : latency_(scale.to_real(config.latency_per_op_s)) {
    if (config.capacity_ops_per_s) spacing_ = scale.to_real(1.0 / *config.capacity_ops_per_s);
}

void TransactionThrottle::pass() {
    auto start = std::chrono::steady_clock::now();
    if (spacing_) {
        std::lock_guard lock(mu_);
        if (next_free_ > start) start = next_free_;
        next_free_ = start + *spacing_;
    }
    const auto done = start + latency_;
    if (done > std::chrono::steady_clock::now()) std::this_thread::sleep_until(done);
}

LocalBlobStore::LocalBlobStore(StoreConfig config, TimeScale scale)
    : config_(std::move(config)), throttle_(config_, scale) {
    config_.validate();
    if (config_.persistent) std::filesystem::create_directories(config_.directory);
}

std::filesystem::path LocalBlobStore::path_for(const std::string& key) const {
    std::string name;
    name.reserve(key.size());
    for (char c : key) name.push_back(c == '/' ? '%' : c);
    return config_.directory / name;
}

void LocalBlobStore::write(const std::string& key, std::string bytes) {
    if (config_.persistent) {
        std::ofstream out(path_for(key), std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io", "cannot write blob " + key);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        return;
    }
    std::lock_guard lock(mu_);
    blobs_[key] = std::move(bytes);
}

void LocalBlobStore::put(const std::string& key, std::string bytes) {
    throttle_.pass();
    ++txns_;
    write(key, std::move(bytes));
}

std::string LocalBlobStore::get(const std::string& key) {
    throttle_.pass();
    ++txns_;
    if (config_.persistent) {
        std::ifstream in(path_for(key), std::ios::binary);
        if (!in) throw NotFoundError("blob not found: " + key);
        return std::string(std::istreambuf_iterator<char>(in), {});
    }
    std::lock_guard lock(mu_);
    auto it = blobs_.find(key);
    if (it == blobs_.end()) throw NotFoundError("blob not found: " + key);
    return it->second;
}

void LocalBlobStore::preload(const std::string& key, std::string bytes) { write(key, std::move(bytes)); }

bool LocalBlobStore::contains(const std::string& key) const {
    if (config_.persistent) return std::filesystem::exists(path_for(key));
    std::lock_guard lock(mu_);
    return blobs_.contains(key);
}

std::optional<std::string> LocalBlobStore::peek(const std::string& key) const {
    if (config_.persistent) {
        std::ifstream in(path_for(key), std::ios::binary);
        if (!in) return std::nullopt;
        return std::string(std::istreambuf_iterator<char>(in), {});
    }
    std::lock_guard lock(mu_);
    auto it = blobs_.find(key);
    if (it == blobs_.end()) return std::nullopt;
    return it->second;
}

}  // namespace convbench::core
