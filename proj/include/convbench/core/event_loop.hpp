// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <coroutine>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <type_traits>
#include <utility>
#include <vector>

#include "convbench/core/io_pool.hpp"

namespace convbench::core {

/// Single-threaded cooperative scheduler. Coroutines resumed here run until
/// their next suspension point; other threads hand work back through post().
class EventLoop : public std::enable_shared_from_this<EventLoop> {
public:
    using Clock = std::chrono::steady_clock;

    EventLoop() = default;
    EventLoop(const EventLoop&) = delete;
    EventLoop& operator=(const EventLoop&) = delete;

    /// Loop thread only.
    void schedule(std::coroutine_handle<> h);
    void add_timer(Clock::time_point at, std::coroutine_handle<> h);

    /// Any thread. Dropped silently once the loop is closed.
    void post(std::coroutine_handle<> h);
    void post(std::function<void()> fn);

    /// Runs everything that is ready, fires due timers, then blocks for at
    /// most `max_wait` until new work is posted or a timer becomes due.
    void run_once(Clock::duration max_wait);

    void close();
    void wake();
    bool idle() const;
    std::size_t pending_timers() const { return timers_.size(); }

private:
    struct Timer {
        Clock::time_point at;
        std::uint64_t seq;
        std::coroutine_handle<> h;
        bool operator>(const Timer& o) const { return at != o.at ? at > o.at : seq > o.seq; }
    };

    void drain_inbox();
    void fire_timers();

    std::deque<std::coroutine_handle<>> ready_;
    std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
    std::uint64_t timer_seq_ = 0;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::vector<std::coroutine_handle<>> inbox_;
    std::vector<std::function<void()>> inbox_fns_;
    bool closed_ = false;
    bool woken_ = false;
};

struct SleepAwaiter {
    EventLoop& loop;
    EventLoop::Clock::time_point at;

    bool await_ready() const noexcept { return EventLoop::Clock::now() >= at; }
    void await_suspend(std::coroutine_handle<> h) { loop.add_timer(at, h); }
    void await_resume() const noexcept {}
};

inline SleepAwaiter sleep_until(EventLoop& loop, EventLoop::Clock::time_point at) { return {loop, at}; }
inline SleepAwaiter sleep_for(EventLoop& loop, EventLoop::Clock::duration d) {
    return {loop, EventLoop::Clock::now() + d};
}

/// Lets other ready coroutines and posted completions run first.
struct YieldAwaiter {
    EventLoop& loop;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) { loop.schedule(h); }
    void await_resume() const noexcept {}
};

inline YieldAwaiter yield_now(EventLoop& loop) { return {loop}; }

/// Runs a blocking callable on the pool and resumes the coroutine on its loop.
template <typename F>
class OffloadAwaiter {
public:
    using Result = std::invoke_result_t<F&>;

    OffloadAwaiter(std::shared_ptr<EventLoop> loop, IoPool& pool, F fn)
        : loop_(std::move(loop)), pool_(pool), fn_(std::move(fn)) {}

    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) {
        pool_.submit([this, h, loop = loop_] {
            try {
                if constexpr (std::is_void_v<Result>) {
                    fn_();
                } else {
                    value_.emplace(fn_());
                }
            } catch (...) {
                error_ = std::current_exception();
            }
            loop->post(h);
        });
    }
    Result await_resume() {
        if (error_) std::rethrow_exception(error_);
        if constexpr (!std::is_void_v<Result>) return std::move(*value_);
    }

private:
    std::shared_ptr<EventLoop> loop_;
    IoPool& pool_;
    F fn_;
    std::conditional_t<std::is_void_v<Result>, char, std::optional<Result>> value_{};
    std::exception_ptr error_;
};

/// Manual-reset event local to one loop.
class LocalEvent {
public:
    explicit LocalEvent(EventLoop& loop) : loop_(loop) {}

    void set();
    void reset() noexcept { set_ = false; }
    bool is_set() const noexcept { return set_; }

    struct Awaiter {
        LocalEvent& ev;
        bool await_ready() const noexcept { return ev.set_; }
        void await_suspend(std::coroutine_handle<> h) { ev.waiters_.push_back(h); }
        void await_resume() const noexcept {}
    };
    Awaiter wait() { return Awaiter{*this}; }

private:
    EventLoop& loop_;
    bool set_ = false;
    std::vector<std::coroutine_handle<>> waiters_;
};

/// Counting semaphore local to one loop; waiters are granted in FIFO order.
/// An empty `permits` means unlimited.
class LocalSemaphore {
public:
    LocalSemaphore(EventLoop& loop, std::optional<std::size_t> permits) : loop_(loop), available_(permits) {}

    void release();
    bool try_acquire() noexcept;
    std::size_t waiting() const noexcept { return waiters_.size(); }

    struct Awaiter {
        LocalSemaphore& sem;
        bool await_ready() noexcept { return sem.try_acquire(); }
        void await_suspend(std::coroutine_handle<> h) { sem.waiters_.push_back(h); }
        void await_resume() const noexcept {}
    };
    Awaiter acquire() { return Awaiter{*this}; }

private:
    EventLoop& loop_;
    std::optional<std::size_t> available_;
    std::deque<std::coroutine_handle<>> waiters_;
};

}  // namespace convbench::core
