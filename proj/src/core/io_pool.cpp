// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/io_pool.hpp"

namespace convbench::core {

IoPool::~IoPool() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
}

void IoPool::submit(std::function<void()> job) {
    std::lock_guard lock(mu_);
    jobs_.push_back(std::move(job));
    if (idle_ < jobs_.size()) {
        threads_.emplace_back([this] { run(); });
    } else {
        cv_.notify_one();
    }
}

std::size_t IoPool::thread_count() const {
    std::lock_guard lock(mu_);
    return threads_.size();
}

void IoPool::run() {
    std::unique_lock lock(mu_);
    for (;;) {
        ++idle_;
        cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
        --idle_;
        if (jobs_.empty()) return;
        auto job = std::move(jobs_.front());
        jobs_.pop_front();
        lock.unlock();
        job();
        lock.lock();
    }
}

}  // namespace convbench::core
