// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/event_loop.hpp"

namespace convbench::core {

void EventLoop::schedule(std::coroutine_handle<> h) { ready_.push_back(h); }

void EventLoop::add_timer(Clock::time_point at, std::coroutine_handle<> h) {
    timers_.push(Timer{at, timer_seq_++, h});
}

void EventLoop::post(std::coroutine_handle<> h) {
    {
        std::lock_guard lock(mu_);
        if (closed_) return;
        inbox_.push_back(h);
    }
    cv_.notify_one();
}

void EventLoop::post(std::function<void()> fn) {
    {
        std::lock_guard lock(mu_);
        if (closed_) return;
        inbox_fns_.push_back(std::move(fn));
    }
    cv_.notify_one();
}

void EventLoop::wake() {
    {
        std::lock_guard lock(mu_);
        woken_ = true;
    }
    cv_.notify_one();
}

void EventLoop::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
        inbox_.clear();
        inbox_fns_.clear();
    }
    cv_.notify_all();
}

bool EventLoop::idle() const { return ready_.empty(); }

void EventLoop::drain_inbox() {
    std::vector<std::coroutine_handle<>> handles;
    std::vector<std::function<void()>> fns;
    {
        std::lock_guard lock(mu_);
        handles.swap(inbox_);
        fns.swap(inbox_fns_);
        woken_ = false;
    }
    for (auto h : handles) ready_.push_back(h);
    for (auto& fn : fns) fn();
}

void EventLoop::fire_timers() {
    const auto now = Clock::now();
    while (!timers_.empty() && timers_.top().at <= now) {
        ready_.push_back(timers_.top().h);
        timers_.pop();
    }
}

void EventLoop::run_once(Clock::duration max_wait) {
    drain_inbox();
    fire_timers();
    while (!ready_.empty()) {
        auto h = ready_.front();
        ready_.pop_front();
        h.resume();
        drain_inbox();
        fire_timers();
    }

    auto deadline = Clock::now() + max_wait;
    if (!timers_.empty() && timers_.top().at < deadline) deadline = timers_.top().at;
    std::unique_lock lock(mu_);
    cv_.wait_until(lock, deadline, [this] { return closed_ || woken_ || !inbox_.empty() || !inbox_fns_.empty(); });
}

void LocalEvent::set() {
    set_ = true;
    for (auto h : waiters_) loop_.schedule(h);
    waiters_.clear();
}

bool LocalSemaphore::try_acquire() noexcept {
    if (!available_) return true;
    if (!waiters_.empty() || *available_ == 0) return false;
    --*available_;
    return true;
}

void LocalSemaphore::release() {
    if (!available_) return;
    if (!waiters_.empty()) {
        // The permit passes straight to the oldest waiter.
        loop_.schedule(waiters_.front());
        waiters_.pop_front();
        return;
    }
    ++*available_;
}

}  // namespace convbench::core
