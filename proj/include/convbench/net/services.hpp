// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <memory>
#include <thread>

#include "convbench/core/blob_store.hpp"
#include "convbench/core/broker.hpp"
#include "convbench/core/event_log.hpp"
#include "convbench/core/result_backend.hpp"
#include "convbench/model/model.hpp"
#include "convbench/net/tcp.hpp"

namespace convbench::net {

/// Broker, result backend, blob store and the shared event log behind one
/// listening socket.
class BrokerServer {
public:
    BrokerServer(Endpoint bind, std::shared_ptr<core::Broker> broker, std::shared_ptr<core::ResultBackend> backend,
                 std::shared_ptr<core::LocalBlobStore> store, std::shared_ptr<core::EventLog> events);

    Message handle(const Message& req);
    Endpoint endpoint() const { return server_->endpoint(); }
    void stop() { server_->stop(); }

private:
    std::shared_ptr<core::Broker> broker_;
    std::shared_ptr<core::ResultBackend> backend_;
    std::shared_ptr<core::LocalBlobStore> store_;
    std::shared_ptr<core::EventLog> events_;
    std::unique_ptr<TcpServer> server_;
};

class RemoteBroker final : public core::Broker {
public:
    explicit RemoteBroker(std::shared_ptr<RpcClient> rpc) : rpc_(std::move(rpc)) {}

    void enqueue(const core::Task& task, const std::string& queue = core::kDefaultQueue) override;
    std::vector<core::Task> fetch(const std::string& worker_id, std::size_t limit,
                                  const std::string& queue = core::kDefaultQueue) override;
    void ack(const std::string& worker_id, const core::TaskId& id) override;
    void nack(const std::string& worker_id, const core::TaskId& id, bool requeue) override;
    void heartbeat(const std::string& worker_id) override;
    std::size_t depth(const std::string& queue = core::kDefaultQueue) override;

private:
    std::shared_ptr<RpcClient> rpc_;
};

class RemoteResultBackend final : public core::ResultBackend {
public:
    explicit RemoteResultBackend(std::shared_ptr<RpcClient> rpc) : rpc_(std::move(rpc)) {}

    void set_state(const core::TaskState& state) override;
    std::optional<core::TaskState> get_state(const core::TaskId& id) override;
    std::vector<std::optional<core::TaskState>> get_states(const std::vector<core::TaskId>& ids) override;

private:
    std::shared_ptr<RpcClient> rpc_;
};

/// Latency and capacity are applied by the server-side store.
class RemoteBlobStore final : public core::BlobStore {
public:
    explicit RemoteBlobStore(std::shared_ptr<RpcClient> rpc) : rpc_(std::move(rpc)) {}

    void put(const std::string& key, std::string bytes) override;
    std::string get(const std::string& key) override;
    /// Server-side count, covering every client.
    std::uint64_t transactions() const override;
    void preload(const std::string& key, std::string bytes);

private:
    std::shared_ptr<RpcClient> rpc_;
};

/// Ships new local events to the server every `interval`, and once more on
/// destruction.
class EventForwarder {
public:
    EventForwarder(std::shared_ptr<core::EventLog> local, std::shared_ptr<RpcClient> rpc,
                   std::chrono::milliseconds interval = std::chrono::milliseconds(20));
    ~EventForwarder();
    void flush();

private:
    std::shared_ptr<core::EventLog> local_;
    std::shared_ptr<RpcClient> rpc_;
    std::chrono::milliseconds interval_;
    std::mutex mu_;
    std::size_t sent_ = 0;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

/// Every event the server holds, from index `since` on.
std::vector<core::Event> fetch_events(RpcClient& rpc, std::size_t since = 0);

/// One model replica behind a socket: INFER -> INFER_REPLY.
class ModelServer {
public:
    ModelServer(Endpoint bind, std::shared_ptr<model::ModelClient> replica);

    Message handle(const Message& req);
    Endpoint endpoint() const { return server_->endpoint(); }
    void stop() { server_->stop(); }

private:
    std::shared_ptr<model::ModelClient> replica_;
    std::unique_ptr<TcpServer> server_;
};

class TcpModelClient final : public model::ModelClient {
public:
    explicit TcpModelClient(Endpoint ep) : rpc_(std::move(ep)) {}
    model::InferReply infer(const model::InferRequest& req) override;

private:
    RpcClient rpc_;
};

}  // namespace convbench::net
