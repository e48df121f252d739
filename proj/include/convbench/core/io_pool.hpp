// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace convbench::core {

/// Thread pool for blocking calls (store round-trips, model requests). It
/// grows whenever a job arrives and no thread is idle, so a blocked call never
/// delays another one.
class IoPool {
public:
    IoPool() = default;
    IoPool(const IoPool&) = delete;
    IoPool& operator=(const IoPool&) = delete;
    ~IoPool();

    void submit(std::function<void()> job);
    std::size_t thread_count() const;

private:
    void run();

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> jobs_;
    std::vector<std::thread> threads_;
    std::size_t idle_ = 0;
    bool stopping_ = false;
};

}  // namespace convbench::core
