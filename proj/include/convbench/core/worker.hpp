// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "convbench/core/blob_store.hpp"
#include "convbench/core/broker.hpp"
#include "convbench/core/coro.hpp"
#include "convbench/core/event_log.hpp"
#include "convbench/core/event_loop.hpp"
#include "convbench/core/result_backend.hpp"
#include "convbench/core/task.hpp"

namespace convbench::core {

class TaskContext;

using Handler = std::function<Co<json>(std::shared_ptr<TaskContext>, json payload)>;

class HandlerRegistry {
public:
    void add(std::string kind, Handler handler);
    const Handler* find(const std::string& kind) const;
    bool contains(const std::string& kind) const { return find(kind) != nullptr; }

private:
    std::map<std::string, Handler> handlers_;
};

struct WorkerConfig {
    std::string worker_id = "w0";
    /// X: tasks held concurrently before any producer increments.
    int prefetch_limit = 1;
    std::optional<int> restart_after_tasks = 64;
    double restart_delay_s = 10.0;
    std::string queue_name = kDefaultQueue;
    /// Wall-clock period for queue polling and subtask completion checks.
    std::chrono::microseconds poll_interval{1000};
    /// Wall-clock period for lease renewal, independent of the task lane.
    std::chrono::milliseconds heartbeat_interval{50};

    void validate() const;
};

/// Shared services a worker attaches to.
struct WorkerEnv {
    std::shared_ptr<Broker> broker;
    std::shared_ptr<ResultBackend> backend;
    std::shared_ptr<BlobStore> store;
    std::shared_ptr<EventLog> events;
    std::shared_ptr<const HandlerRegistry> handlers;
    TimeScale time_scale{};
};

struct SubtaskSpec {
    std::string kind;
    json payload = json::object();
    std::optional<double> timeout_s;
};

class Worker;

namespace detail {
struct SpawnerState;
struct GroupState;
}  // namespace detail

/// Bounded producer of direct subtasks. At most `window` children are queued
/// or running at any time; submit() suspends until a slot frees up.
class SubtaskSpawner {
public:
    SubtaskSpawner(std::shared_ptr<TaskContext> ctx, std::optional<std::size_t> window);

    Co<TaskId> submit(SubtaskSpec spec);
    /// Takes as many specs from the front as there are free slots (at least
    /// one, waiting if needed) and enqueues them in one round trip.
    Co<std::vector<TaskId>> submit_some(std::deque<SubtaskSpec>& specs);
    /// Suspends until `id` (a child of this spawner) is terminal.
    Co<TaskState> wait(TaskId id);

    std::size_t pending() const;
    std::size_t max_pending() const;
    std::optional<std::size_t> window() const;

private:
    std::shared_ptr<detail::SpawnerState> state_;
};

/// Results of a fixed list of subtasks, yielded in completion order.
class SubtaskStream {
public:
    SubtaskStream(std::shared_ptr<TaskContext> ctx, std::vector<SubtaskSpec> specs,
                  std::optional<std::size_t> window);

    /// Empty once every subtask result has been consumed.
    Co<std::optional<TaskState>> next();
    std::size_t max_pending() const { return spawner_.max_pending(); }

    struct Shared;

private:
    SubtaskSpawner spawner_;
    std::shared_ptr<Shared> shared_;
};

/// Local concurrency inside one task: children run on the same worker loop
/// and join() waits for all of them, rethrowing the first failure.
class TaskGroup {
public:
    explicit TaskGroup(EventLoop& loop);

    void spawn(Co<void> co);
    Co<void> join();

private:
    std::shared_ptr<detail::GroupState> state_;
};

/// Per-task handle passed to handlers.
class TaskContext : public std::enable_shared_from_this<TaskContext> {
public:
    TaskContext(Worker& worker, Task task);

    const Task& task() const noexcept { return task_; }
    const std::string& worker_id() const;
    TimeScale time_scale() const;
    EventLog& events();
    EventLoop& loop();

    /// Occupies the worker lane for `sim_seconds`; nothing else on this worker runs.
    void compute(const std::string& stage, double sim_seconds);
    /// Gives the lane to other tasks on this worker between compute steps.
    YieldAwaiter yield() { return yield_now(loop()); }
    /// Yields for `sim_seconds`.
    Co<void> io_wait(std::string stage, double sim_seconds);

    Co<void> store_blob(std::string key, std::string bytes, std::string stage = "store");
    Co<std::string> load_blob(std::string key, std::string stage = "store");

    /// Reads a task's state from the results backend (not a store transaction).
    Co<std::optional<TaskState>> peek_state(TaskId id);
    /// Suspends until `id` is terminal.
    Co<TaskState> await_task(TaskId id);

    /// The first call marks this task as a producer, raising the worker's
    /// effective fetch limit by one until the task completes.
    SubtaskSpawner& subtasks(std::optional<std::size_t> window);

    template <typename F>
    auto offload(F fn) {
        return OffloadAwaiter<F>(loop_shared(), io_pool(), std::move(fn));
    }

    bool cancelled() const noexcept { return cancelled_->load(); }
    void check_cancelled() const;

private:
    friend class Worker;
    friend class SubtaskSpawner;
    std::shared_ptr<EventLoop> loop_shared();
    IoPool& io_pool();

    Worker& worker_;
    Task task_;
    std::shared_ptr<std::atomic<bool>> cancelled_ = std::make_shared<std::atomic<bool>>(false);
    std::unique_ptr<SubtaskSpawner> spawner_;
};

struct WorkerStats {
    std::uint64_t completed = 0;
    std::uint64_t restarts = 0;
    std::size_t running = 0;
    std::size_t effective_limit = 0;
    std::size_t max_running = 0;
};

/// Fetch -> execute -> ack loop on a dedicated thread.
class Worker {
public:
    Worker(WorkerConfig config, WorkerEnv env);
    Worker(const Worker&) = delete;
    Worker& operator=(const Worker&) = delete;
    ~Worker();

    void start();
    /// Graceful stop; tasks still running are abandoned without acknowledgement.
    void stop();
    /// Stops abruptly, as if the process died: no state writes, no acks, no heartbeats.
    void kill();

    const WorkerConfig& config() const noexcept { return config_; }
    const WorkerEnv& env() const noexcept { return env_; }
    WorkerStats stats() const;

private:
    friend class TaskContext;
    friend class SubtaskSpawner;
    friend struct detail::SpawnerState;

    struct Running {
        Task task;
        std::shared_ptr<TaskContext> ctx;
        bool producer = false;
        std::optional<EventLoop::Clock::time_point> deadline;
    };

    void loop_main();
    void heartbeat_main();
    void tick();
    void poll_watches();
    void check_timeouts();
    void maybe_restart();
    void maybe_fetch();
    void begin(Task task);
    Co<void> execute(std::shared_ptr<TaskContext> ctx);
    void finish(const TaskId& id);
    std::size_t effective_limit() const;
    void mark_producer(const TaskId& id);
    void watch(const TaskId& id, std::function<void(TaskState)> cb);
    void log(EventKind kind, std::optional<TaskId> task, json meta = json::object());

    WorkerConfig config_;
    WorkerEnv env_;
    std::shared_ptr<EventLoop> loop_ = std::make_shared<EventLoop>();
    IoPool pool_;

    // Loop-thread state.
    std::unordered_map<TaskId, Running> running_;
    std::unordered_map<TaskId, std::vector<std::function<void(TaskState)>>> watches_;
    EventLoop::Clock::time_point next_fetch_{};
    EventLoop::Clock::time_point next_watch_poll_{};
    std::uint64_t completed_since_restart_ = 0;
    bool restart_pending_ = false;
    bool idle_logged_ = false;

    std::atomic<bool> stop_{false};
    std::atomic<bool> killed_{false};
    std::atomic<std::uint64_t> completed_{0};
    std::atomic<std::uint64_t> restarts_{0};
    std::atomic<std::size_t> running_count_{0};
    std::atomic<std::size_t> limit_{0};
    std::atomic<std::size_t> max_running_{0};
    std::thread thread_;
    std::thread heartbeat_thread_;
    std::mutex hb_mu_;
    std::condition_variable hb_cv_;
};

/// Submits root tasks ("jobs") and observes their completion.
class Client {
public:
    Client(WorkerEnv env, std::string job_prefix = "job");

    /// Enqueues the job's root task and returns its job id immediately.
    /// `meta` is attached to the job_submitted event.
    std::string submit(const std::string& root_kind, json payload,
                       const std::string& queue = kDefaultQueue, json meta = json::object());
    /// Polls the root task until terminal or `timeout` elapses.
    std::optional<TaskState> wait(const std::string& job_id, std::chrono::milliseconds timeout,
                                  std::chrono::microseconds poll = std::chrono::microseconds(500));
    std::optional<TaskState> root_state(const std::string& job_id);

private:
    WorkerEnv env_;
    std::string prefix_;
    // Shared by every client in the process so job ids never collide.
    static std::atomic<std::uint64_t> counter_;
};

}  // namespace convbench::core
