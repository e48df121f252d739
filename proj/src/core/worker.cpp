// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/worker.hpp"

#include <algorithm>
#include <deque>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "convbench/core/errors.hpp"

namespace convbench::core {

// ---------------------------------------------------------------------------
// HandlerRegistry / WorkerConfig

void HandlerRegistry::add(std::string kind, Handler handler) { handlers_[std::move(kind)] = std::move(handler); }

const Handler* HandlerRegistry::find(const std::string& kind) const {
    auto it = handlers_.find(kind);
    return it == handlers_.end() ? nullptr : &it->second;
}

void WorkerConfig::validate() const {
    if (prefetch_limit < 1) throw InvalidArgumentError("prefetch limit must be >= 1");
    if (restart_after_tasks && *restart_after_tasks < 1) {
        throw InvalidArgumentError("restart_after_tasks must be >= 1 when set");
    }
    if (restart_delay_s < 0) throw InvalidArgumentError("restart delay must be >= 0");
}

// ---------------------------------------------------------------------------
// Spawner internals

namespace detail {

struct SpawnerState {
    SpawnerState(std::shared_ptr<TaskContext> c, std::optional<std::size_t> w)
        : ctx(std::move(c)), window(w), slots(ctx->loop(), w) {}

    std::shared_ptr<TaskContext> ctx;
    std::optional<std::size_t> window;
    LocalSemaphore slots;
    std::size_t next_index = 0;
    std::size_t pending = 0;
    std::size_t max_pending = 0;
    std::unordered_set<TaskId> mine;
    std::unordered_map<TaskId, TaskState> done;
    std::unordered_map<TaskId, std::vector<std::coroutine_handle<>>> waiters;
};

struct GroupState {
    explicit GroupState(EventLoop& l) : loop(l), done(l) {}
    EventLoop& loop;
    std::size_t active = 0;
    LocalEvent done;
    std::exception_ptr first_error;
};

}  // namespace detail

namespace {

struct SpawnWaitAwaiter {
    std::shared_ptr<detail::SpawnerState> st;
    TaskId id;
    bool await_ready() const { return st->done.contains(id); }
    void await_suspend(std::coroutine_handle<> h) { st->waiters[id].push_back(h); }
    void await_resume() const noexcept {}
};

struct WatchAwaiter {
    std::function<void(std::function<void(TaskState)>)> register_watch;
    EventLoop& loop;
    std::optional<TaskState> result;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) {
        register_watch([this, h](TaskState s) {
            result = std::move(s);
            loop.schedule(h);
        });
    }
    TaskState await_resume() { return std::move(*result); }
};

}  // namespace

SubtaskSpawner::SubtaskSpawner(std::shared_ptr<TaskContext> ctx, std::optional<std::size_t> window) {
    if (window && *window < 1) throw InvalidArgumentError("subtask window must be >= 1");
    state_ = std::make_shared<detail::SpawnerState>(std::move(ctx), window);
}

Co<TaskId> SubtaskSpawner::submit(SubtaskSpec spec) {
    std::deque<SubtaskSpec> one;
    one.push_back(std::move(spec));
    std::vector<TaskId> ids = co_await submit_some(one);
    co_return ids.front();
}

Co<std::vector<TaskId>> SubtaskSpawner::submit_some(std::deque<SubtaskSpec>& specs) {
    auto st = state_;
    auto& ctx = *st->ctx;
    auto& worker = ctx.worker_;
    if (specs.empty()) co_return std::vector<TaskId>{};
    worker.mark_producer(ctx.task().id);
    co_await st->slots.acquire();
    ctx.check_cancelled();

    std::vector<Task> batch;
    do {
        SubtaskSpec spec = std::move(specs.front());
        specs.pop_front();
        const TaskId id = ctx.task().id.child(st->next_index++);
        batch.push_back(Task{id, std::move(spec.kind), std::move(spec.payload), ctx.task().id, now_us(), 1,
                             spec.timeout_s});
        st->mine.insert(id);
        ++st->pending;
        st->max_pending = std::max(st->max_pending, st->pending);
        ctx.events().append(EventKind::task_enqueued, id, ctx.worker_id(),
                            json{{"kind", batch.back().kind}, {"parent", ctx.task().id.str()}, {"pending", st->pending}});
    } while (!specs.empty() && st->slots.try_acquire());

    auto env = worker.env();
    const auto queue = worker.config().queue_name;
    const auto retry_delay = worker.config().poll_interval;
    auto enqueue_op = ctx.offload([env, batch, queue, retry_delay] {
        for (const auto& child : batch) {
            TaskState queued{child.id, TaskStatus::queued, 1, std::nullopt, child.created_at};
            try {
                env.backend->set_state(queued);
            } catch (const IllegalTransitionError&) {
                // Already known from an earlier attempt of the parent.
            }
            for (;;) {
                try {
                    env.broker->enqueue(child, queue);
                    break;
                } catch (const DuplicateTaskError&) {
                    break;
                } catch (const QueueFullError&) {
                    std::this_thread::sleep_for(retry_delay);
                }
            }
        }
    });
    co_await enqueue_op;

    std::vector<TaskId> ids;
    for (const auto& child : batch) {
        const TaskId id = child.id;
        ids.push_back(id);
        worker.watch(id, [st, id](TaskState s) {
            --st->pending;
            st->done[id] = std::move(s);
            st->slots.release();
            if (auto it = st->waiters.find(id); it != st->waiters.end()) {
                for (auto h : it->second) st->ctx->loop().schedule(h);
                st->waiters.erase(it);
            }
        });
    }
    co_return ids;
}

Co<TaskState> SubtaskSpawner::wait(TaskId id) {
    auto st = state_;
    if (!st->mine.contains(id)) throw InvalidArgumentError("not a subtask of this producer: " + id.str());
    SpawnWaitAwaiter waiting{st, id};
    co_await waiting;
    st->ctx->check_cancelled();
    // The result goes to the first waiter; later waits see the status only.
    auto& held = st->done.at(id);
    json result = std::exchange(held.result, json());
    TaskState out = held;
    out.result = std::move(result);
    co_return out;
}

std::size_t SubtaskSpawner::pending() const { return state_->pending; }
std::size_t SubtaskSpawner::max_pending() const { return state_->max_pending; }
std::optional<std::size_t> SubtaskSpawner::window() const { return state_->window; }

// ---------------------------------------------------------------------------
// SubtaskStream

struct SubtaskStream::Shared {
    explicit Shared(EventLoop& loop) : signal(loop) {}
    std::vector<SubtaskSpec> specs;
    std::deque<TaskState> completed;
    std::size_t consumed = 0;
    bool started = false;
    LocalEvent signal;
    std::exception_ptr error;
};

namespace {

Co<void> await_one(SubtaskSpawner spawner, std::shared_ptr<SubtaskStream::Shared> shared, TaskId id);

}  // namespace

SubtaskStream::SubtaskStream(std::shared_ptr<TaskContext> ctx, std::vector<SubtaskSpec> specs,
                             std::optional<std::size_t> window)
    : spawner_(ctx, window), shared_(std::make_shared<Shared>(ctx->loop())) {
    shared_->specs = std::move(specs);
}

namespace {

Co<void> await_one(SubtaskSpawner spawner, std::shared_ptr<SubtaskStream::Shared> shared, TaskId id) {
    TaskState s = co_await spawner.wait(id);
    shared->completed.push_back(std::move(s));
    shared->signal.set();
}

Co<void> feed(SubtaskSpawner spawner, std::shared_ptr<SubtaskStream::Shared> shared) {
    std::deque<SubtaskSpec> todo(std::make_move_iterator(shared->specs.begin()),
                                 std::make_move_iterator(shared->specs.end()));
    while (!todo.empty()) {
        std::vector<TaskId> ids = co_await spawner.submit_some(todo);
        for (const auto& id : ids) {
            launch(await_one(spawner, shared, id), [shared](std::exception_ptr e) {
                if (e && !shared->error) shared->error = e;
                if (e) shared->signal.set();
            });
        }
    }
}

}  // namespace

Co<std::optional<TaskState>> SubtaskStream::next() {
    auto shared = shared_;
    if (!shared->started) {
        shared->started = true;
        launch(feed(spawner_, shared), [shared](std::exception_ptr e) {
            if (e && !shared->error) shared->error = e;
            if (e) shared->signal.set();
        });
    }
    while (shared->completed.empty()) {
        if (shared->error) std::rethrow_exception(shared->error);
        if (shared->consumed == shared->specs.size()) co_return std::nullopt;
        shared->signal.reset();
        co_await shared->signal.wait();
    }
    TaskState s = std::move(shared->completed.front());
    shared->completed.pop_front();
    ++shared->consumed;
    co_return s;
}

// ---------------------------------------------------------------------------
// TaskGroup

TaskGroup::TaskGroup(EventLoop& loop) : state_(std::make_shared<detail::GroupState>(loop)) {}

void TaskGroup::spawn(Co<void> co) {
    auto st = state_;
    ++st->active;
    st->done.reset();
    launch(std::move(co), [st](std::exception_ptr e) {
        if (e && !st->first_error) st->first_error = e;
        if (--st->active == 0) st->done.set();
    });
}

Co<void> TaskGroup::join() {
    auto st = state_;
    if (st->active != 0) co_await st->done.wait();
    if (st->first_error) std::rethrow_exception(st->first_error);
}

// ---------------------------------------------------------------------------
// TaskContext

TaskContext::TaskContext(Worker& worker, Task task) : worker_(worker), task_(std::move(task)) {}

const std::string& TaskContext::worker_id() const { return worker_.config_.worker_id; }
TimeScale TaskContext::time_scale() const { return worker_.env_.time_scale; }
EventLog& TaskContext::events() { return *worker_.env_.events; }
EventLoop& TaskContext::loop() { return *worker_.loop_; }
std::shared_ptr<EventLoop> TaskContext::loop_shared() { return worker_.loop_; }
IoPool& TaskContext::io_pool() { return worker_.pool_; }

void TaskContext::check_cancelled() const {
    if (cancelled()) throw TaskCancelled(task_.id.str());
}

void TaskContext::compute(const std::string& stage, double sim_seconds) {
    check_cancelled();
    const Micros start = now_us();
    const auto until = std::chrono::steady_clock::now() + time_scale().to_real(sim_seconds);
    std::this_thread::sleep_until(until);
    events().append(EventKind::compute, task_.id, worker_id(),
                    json{{"stage", stage}, {"start_us", start}, {"dur_us", now_us() - start}});
}

Co<void> TaskContext::io_wait(std::string stage, double sim_seconds) {
    check_cancelled();
    const Micros start = now_us();
    co_await sleep_for(loop(), time_scale().to_real(sim_seconds));
    events().append(EventKind::io_wait, task_.id, worker_id(),
                    json{{"stage", stage}, {"start_us", start}, {"dur_us", now_us() - start}});
    check_cancelled();
}

Co<void> TaskContext::store_blob(std::string key, std::string bytes, std::string stage) {
    check_cancelled();
    auto store = worker_.env_.store;
    const Micros start = now_us();
    const auto size = bytes.size();
    std::exception_ptr error;
    Micros done_at = 0;
    try {
        auto put_op = offload([store, key, b = std::move(bytes)]() mutable {
            store->put(key, std::move(b));
            return now_us();
        });
        done_at = co_await put_op;
    } catch (...) {
        error = std::current_exception();
        done_at = now_us();
    }
    events().append(EventKind::store_txn, task_.id, worker_id(),
                    json{{"op", "put"}, {"key", key}, {"stage", stage}, {"bytes", size},
                         {"start_us", start}, {"dur_us", done_at - start}, {"ok", !error}});
    if (error) std::rethrow_exception(error);
    check_cancelled();
}

Co<std::string> TaskContext::load_blob(std::string key, std::string stage) {
    check_cancelled();
    auto store = worker_.env_.store;
    const Micros start = now_us();
    std::exception_ptr error;
    std::pair<std::string, Micros> got;
    try {
        auto get_op = offload([store, key] { return std::pair{store->get(key), now_us()}; });
        got = co_await get_op;
    } catch (...) {
        error = std::current_exception();
        got.second = now_us();
    }
    events().append(EventKind::store_txn, task_.id, worker_id(),
                    json{{"op", "get"}, {"key", key}, {"stage", stage}, {"bytes", got.first.size()},
                         {"start_us", start}, {"dur_us", got.second - start}, {"ok", !error}});
    if (error) std::rethrow_exception(error);
    check_cancelled();
    co_return std::move(got.first);
}

Co<std::optional<TaskState>> TaskContext::peek_state(TaskId id) {
    auto backend = worker_.env_.backend;
    auto op = offload([backend, id] { return backend->get_state(id); });
    auto s = co_await op;
    check_cancelled();
    co_return s;
}

Co<TaskState> TaskContext::await_task(TaskId id) {
    Worker& w = worker_;
    WatchAwaiter watch{[&w, id](std::function<void(TaskState)> cb) { w.watch(id, std::move(cb)); }, loop(),
                       std::nullopt};
    TaskState s = co_await watch;
    check_cancelled();
    co_return s;
}

SubtaskSpawner& TaskContext::subtasks(std::optional<std::size_t> window) {
    if (!spawner_) spawner_ = std::make_unique<SubtaskSpawner>(shared_from_this(), window);
    return *spawner_;
}

// ---------------------------------------------------------------------------
// Worker

Worker::Worker(WorkerConfig config, WorkerEnv env) : config_(std::move(config)), env_(std::move(env)) {
    config_.validate();
    if (!env_.broker || !env_.backend || !env_.store || !env_.events || !env_.handlers) {
        throw InvalidArgumentError("worker environment is incomplete");
    }
    limit_ = static_cast<std::size_t>(config_.prefetch_limit);
}

Worker::~Worker() {
    stop();
    loop_->close();
}

void Worker::start() {
    if (thread_.joinable()) return;
    stop_ = false;
    thread_ = std::thread([this] { loop_main(); });
    heartbeat_thread_ = std::thread([this] { heartbeat_main(); });
}

void Worker::stop() {
    stop_ = true;
    hb_cv_.notify_all();
    loop_->wake();
    if (thread_.joinable()) thread_.join();
    if (heartbeat_thread_.joinable()) heartbeat_thread_.join();
    if (!running_.empty() && !killed_) {
        spdlog::debug("worker {} stopped with {} task(s) still held", config_.worker_id, running_.size());
    }
}

void Worker::kill() {
    killed_ = true;
    stop();
    loop_->close();
}

WorkerStats Worker::stats() const {
    return WorkerStats{completed_.load(), restarts_.load(), running_count_.load(), limit_.load(), max_running_.load()};
}

void Worker::log(EventKind kind, std::optional<TaskId> task, json meta) {
    env_.events->append(kind, std::move(task), config_.worker_id, std::move(meta));
}

void Worker::heartbeat_main() {
    std::unique_lock lock(hb_mu_);
    while (!stop_) {
        hb_cv_.wait_for(lock, config_.heartbeat_interval, [this] { return stop_.load(); });
        if (stop_) break;
        try {
            env_.broker->heartbeat(config_.worker_id);
        } catch (const std::exception& e) {
            spdlog::warn("worker {} heartbeat failed: {}", config_.worker_id, e.what());
        }
    }
}

void Worker::loop_main() {
    while (!stop_) {
        try {
            check_timeouts();
            maybe_restart();
            maybe_fetch();
            poll_watches();
        } catch (const std::exception& e) {
            spdlog::warn("worker {}: {}", config_.worker_id, e.what());
        }
        loop_->run_once(config_.poll_interval);
    }
}

std::size_t Worker::effective_limit() const {
    std::size_t producers = 0;
    for (const auto& [id, r] : running_) producers += r.producer ? 1 : 0;
    return static_cast<std::size_t>(config_.prefetch_limit) + producers;
}

void Worker::mark_producer(const TaskId& id) {
    auto it = running_.find(id);
    if (it == running_.end() || it->second.producer) return;
    it->second.producer = true;
    limit_ = effective_limit();
    next_fetch_ = {};
}

void Worker::watch(const TaskId& id, std::function<void(TaskState)> cb) {
    watches_[id].push_back(std::move(cb));
}

void Worker::poll_watches() {
    if (watches_.empty()) return;
    const auto now = EventLoop::Clock::now();
    if (now < next_watch_poll_) return;
    next_watch_poll_ = now + config_.poll_interval;

    std::vector<TaskId> ids;
    ids.reserve(watches_.size());
    for (const auto& [id, cbs] : watches_) ids.push_back(id);
    auto states = env_.backend->get_states(ids);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!states[i] || !is_terminal(states[i]->status)) continue;
        auto node = watches_.extract(ids[i]);
        auto& cbs = node.mapped();
        for (std::size_t k = 0; k < cbs.size(); ++k) {
            if (k + 1 == cbs.size()) {
                cbs[k](std::move(*states[i]));
            } else {
                cbs[k](*states[i]);
            }
        }
    }
}

void Worker::check_timeouts() {
    const auto now = EventLoop::Clock::now();
    std::vector<TaskId> expired;
    for (const auto& [id, r] : running_) {
        if (r.deadline && *r.deadline <= now) expired.push_back(id);
    }
    for (const auto& id : expired) {
        auto& r = running_.at(id);
        r.ctx->cancelled_->store(true);
        TaskState st{id, TaskStatus::timed_out, r.task.attempt, config_.worker_id, r.task.created_at};
        if (auto cur = env_.backend->get_state(id)) st.started_at = cur->started_at;
        st.finished_at = now_us();
        st.error = "task exceeded its timeout";
        // Logged before the state becomes visible, so a parent reacting to it
        // always logs its next enqueue after this finish.
        log(EventKind::task_finished, id,
            json{{"status", "timed_out"}, {"attempt", r.task.attempt}, {"kind", r.task.kind}});
        try {
            env_.backend->set_state(st);
        } catch (const IllegalTransitionError&) {
        }
        try {
            env_.broker->ack(config_.worker_id, id);
        } catch (const NotFoundError&) {
        }
        finish(id);
    }
}

void Worker::maybe_restart() {
    if (!restart_pending_) return;
    for (const auto& [id, r] : running_) {
        if (!r.producer) return;  // still draining
    }
    log(EventKind::worker_restart, std::nullopt,
        json{{"delay_s", config_.restart_delay_s}, {"completed", completed_.load()}});
    const auto until = std::chrono::steady_clock::now() + env_.time_scale.to_real(config_.restart_delay_s);
    while (!stop_ && std::chrono::steady_clock::now() < until) {
        std::this_thread::sleep_until(std::min(until, std::chrono::steady_clock::now() + std::chrono::milliseconds(5)));
    }
    completed_since_restart_ = 0;
    restart_pending_ = false;
    ++restarts_;
    next_fetch_ = {};
}

void Worker::maybe_fetch() {
    if (restart_pending_ || stop_) return;
    const auto now = EventLoop::Clock::now();
    if (now < next_fetch_) return;
    const std::size_t limit = effective_limit();
    limit_ = limit;
    if (running_.size() >= limit) return;

    auto tasks = env_.broker->fetch(config_.worker_id, limit - running_.size(), config_.queue_name);
    if (tasks.empty()) {
        next_fetch_ = now + config_.poll_interval;
        if (running_.empty() && !idle_logged_) {
            log(EventKind::worker_idle, std::nullopt, json{{"queue", config_.queue_name}});
            idle_logged_ = true;
        }
        return;
    }
    idle_logged_ = false;
    for (auto& t : tasks) {
        auto current = env_.backend->get_state(t.id);
        if (current && is_terminal(current->status)) {
            // Redelivered after it already finished elsewhere.
            env_.broker->ack(config_.worker_id, t.id);
            continue;
        }
        begin(std::move(t));
    }
}

void Worker::begin(Task task) {
    auto ctx = std::make_shared<TaskContext>(*this, task);
    Running r{task, ctx, false, std::nullopt};
    if (task.timeout_s) {
        r.deadline = EventLoop::Clock::now() + env_.time_scale.to_real(*task.timeout_s);
    }
    const TaskId id = task.id;
    running_.emplace(id, std::move(r));
    running_count_ = running_.size();
    max_running_ = std::max(max_running_.load(), running_.size());
    launch(execute(std::move(ctx)), [](std::exception_ptr e) {
        if (e) {
            try {
                std::rethrow_exception(e);
            } catch (const std::exception& ex) {
                spdlog::error("task wrapper failed: {}", ex.what());
            }
        }
    });
}

Co<void> Worker::execute(std::shared_ptr<TaskContext> ctx) {
    const Task& t = ctx->task();
    const TaskId id = t.id;
    TaskState st{id, TaskStatus::running, t.attempt, config_.worker_id, t.created_at, now_us()};
    try {
        env_.backend->set_state(st);
    } catch (const IllegalTransitionError& e) {
        spdlog::warn("worker {}: {}", config_.worker_id, e.what());
    }
    log(EventKind::task_started, id, json{{"kind", t.kind}, {"attempt", t.attempt}});

    json result;
    std::optional<std::string> error;
    const Handler* handler = env_.handlers->find(t.kind);
    if (!handler) {
        error = "unknown task kind: " + t.kind;
    } else {
        try {
            auto body = (*handler)(ctx, t.payload);
            result = co_await body;
        } catch (const TaskCancelled&) {
        } catch (const std::exception& e) {
            error = e.what();
        }
    }
    ctx->spawner_.reset();
    if (killed_ || ctx->cancelled()) co_return;

    st.status = error ? TaskStatus::failed : TaskStatus::succeeded;
    st.finished_at = now_us();
    st.error = error;
    st.result = std::move(result);
    if (st.result.is_object() && st.result.contains("result_key")) {
        st.result_key = st.result["result_key"].get<std::string>();
    }
    json meta{{"status", to_string(st.status)}, {"attempt", t.attempt}, {"kind", t.kind}};
    if (error) meta["error"] = *error;
    // Lets the harness count pages finished at a given instant.
    if (st.result.is_object() && st.result.contains("pages") && st.result["pages"].is_number_integer()) {
        meta["pages"] = st.result["pages"];
    }
    log(EventKind::task_finished, id, std::move(meta));
    try {
        env_.backend->set_state(st);
    } catch (const IllegalTransitionError& e) {
        spdlog::warn("worker {}: {}", config_.worker_id, e.what());
    }
    try {
        env_.broker->ack(config_.worker_id, id);
    } catch (const NotFoundError& e) {
        spdlog::warn("worker {}: {}", config_.worker_id, e.what());
    }
    finish(id);
}

void Worker::finish(const TaskId& id) {
    running_.erase(id);
    running_count_ = running_.size();
    ++completed_;
    ++completed_since_restart_;
    if (config_.restart_after_tasks &&
        completed_since_restart_ >= static_cast<std::uint64_t>(*config_.restart_after_tasks)) {
        restart_pending_ = true;
    }
    limit_ = effective_limit();
    next_fetch_ = {};
}

// ---------------------------------------------------------------------------
// Client

std::atomic<std::uint64_t> Client::counter_{0};

Client::Client(WorkerEnv env, std::string job_prefix) : env_(std::move(env)), prefix_(std::move(job_prefix)) {
    if (!env_.broker || !env_.backend || !env_.events) throw InvalidArgumentError("client environment is incomplete");
}

std::string Client::submit(const std::string& root_kind, json payload, const std::string& queue, json meta) {
    const std::string job_id = prefix_ + "-" + std::to_string(++counter_);
    const TaskId root = TaskId::root(job_id);
    const Micros now = now_us();
    if (!meta.is_object()) meta = json::object();
    meta["kind"] = root_kind;
    env_.events->append(EventKind::job_submitted, root, std::nullopt, std::move(meta));
    env_.backend->set_state(TaskState{root, TaskStatus::queued, 1, std::nullopt, now});
    env_.events->append(EventKind::task_enqueued, root, std::nullopt, json{{"kind", root_kind}});
    env_.broker->enqueue(Task{root, root_kind, std::move(payload), std::nullopt, now, 1, std::nullopt}, queue);
    return job_id;
}

std::optional<TaskState> Client::root_state(const std::string& job_id) {
    return env_.backend->get_state(TaskId::root(job_id));
}

std::optional<TaskState> Client::wait(const std::string& job_id, std::chrono::milliseconds timeout,
                                      std::chrono::microseconds poll) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        auto s = root_state(job_id);
        if (s && is_terminal(s->status)) return s;
        if (std::chrono::steady_clock::now() >= deadline) return s;
        std::this_thread::sleep_for(poll);
    }
}

}  // namespace convbench::core
