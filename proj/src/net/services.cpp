// SPDX-License-Identifier: Apache-2.0
#include "convbench/net/services.hpp"

#include <spdlog/spdlog.h>

namespace convbench::net {

using core::Task;
using core::TaskId;
using core::TaskState;

namespace {

Message ack(json payload = json::object()) { return Message{"ACK", "", std::move(payload)}; }

std::string queue_of(const json& p) { return p.value("queue", std::string(core::kDefaultQueue)); }

}  // namespace

BrokerServer::BrokerServer(Endpoint bind, std::shared_ptr<core::Broker> broker,
                           std::shared_ptr<core::ResultBackend> backend, std::shared_ptr<core::LocalBlobStore> store,
                           std::shared_ptr<core::EventLog> events)
    : broker_(std::move(broker)), backend_(std::move(backend)), store_(std::move(store)), events_(std::move(events)) {
    server_ = std::make_unique<TcpServer>(std::move(bind), [this](const Message& m) { return handle(m); });
}

Message BrokerServer::handle(const Message& req) {
    const json& p = req.payload;
    try {
        if (req.type == "ENQUEUE") {
            broker_->enqueue(p.at("task").get<Task>(), queue_of(p));
            return ack();
        }
        if (req.type == "FETCH") {
            auto tasks = broker_->fetch(p.at("worker").get<std::string>(), p.value("limit", std::size_t{1}), queue_of(p));
            return Message{"DELIVER", "", json{{"tasks", tasks}}};
        }
        if (req.type == "ACK") {
            broker_->ack(p.at("worker").get<std::string>(), p.at("id").get<TaskId>());
            return ack();
        }
        if (req.type == "NACK") {
            broker_->nack(p.at("worker").get<std::string>(), p.at("id").get<TaskId>(), p.value("requeue", true));
            return ack();
        }
        if (req.type == "STATE_SET") {
            backend_->set_state(p.at("state").get<TaskState>());
            return ack();
        }
        if (req.type == "STATE_GET") {
            if (p.contains("ids")) {
                const auto states = backend_->get_states(p["ids"].get<std::vector<TaskId>>());
                json out = json::array();
                for (const auto& s : states) out.push_back(s ? json(*s) : json(nullptr));
                return Message{"STATE_REPLY", "", json{{"states", out}}};
            }
            const auto s = backend_->get_state(p.at("id").get<TaskId>());
            return Message{"STATE_REPLY", "", json{{"state", s ? json(*s) : json(nullptr)}}};
        }
        if (req.type == "KV_PUT") {
            auto bytes = base64_decode(p.at("data").get<std::string>());
            if (p.value("preload", false)) {
                store_->preload(p.at("key").get<std::string>(), std::move(bytes));
            } else {
                store_->put(p.at("key").get<std::string>(), std::move(bytes));
            }
            return ack();
        }
        if (req.type == "KV_GET") {
            const auto key = p.at("key").get<std::string>();
            return Message{"KV_REPLY", "", json{{"key", key}, {"data", base64_encode(store_->get(key))}}};
        }
        if (req.type == "PING") {
            if (p.contains("worker")) broker_->heartbeat(p["worker"].get<std::string>());
            return ack(json{{"depth", broker_->depth(queue_of(p))},
                            {"store_transactions", store_->transactions()},
                            {"events", events_->size()}});
        }
        if (req.type == "EVENTS_APPEND") {
            for (const auto& e : p.at("events")) events_->append(e.get<core::Event>());
            return ack();
        }
        if (req.type == "EVENTS_DUMP") {
            const auto all = events_->snapshot();
            const std::size_t since = std::min(p.value("since", std::size_t{0}), all.size());
            return Message{"EVENTS_REPLY", "", json{{"events", std::vector<core::Event>(all.begin() + since, all.end())}}};
        }
    } catch (const json::exception& e) {
        throw MalformedMessageError(req.type + ": " + e.what());
    }
    throw UnknownTypeError(req.type);
}

void RemoteBroker::enqueue(const Task& task, const std::string& queue) {
    rpc_->call("ENQUEUE", json{{"task", task}, {"queue", queue}});
}

std::vector<Task> RemoteBroker::fetch(const std::string& worker_id, std::size_t limit, const std::string& queue) {
    auto reply = rpc_->call("FETCH", json{{"worker", worker_id}, {"limit", limit}, {"queue", queue}});
    return reply.payload.at("tasks").get<std::vector<Task>>();
}

void RemoteBroker::ack(const std::string& worker_id, const TaskId& id) {
    rpc_->call("ACK", json{{"worker", worker_id}, {"id", id}});
}

void RemoteBroker::nack(const std::string& worker_id, const TaskId& id, bool requeue) {
    rpc_->call("NACK", json{{"worker", worker_id}, {"id", id}, {"requeue", requeue}});
}

void RemoteBroker::heartbeat(const std::string& worker_id) { rpc_->call("PING", json{{"worker", worker_id}}); }

std::size_t RemoteBroker::depth(const std::string& queue) {
    return rpc_->call("PING", json{{"queue", queue}}).payload.at("depth").get<std::size_t>();
}

void RemoteResultBackend::set_state(const TaskState& state) { rpc_->call("STATE_SET", json{{"state", state}}); }

std::optional<TaskState> RemoteResultBackend::get_state(const TaskId& id) {
    const auto reply = rpc_->call("STATE_GET", json{{"id", id}});
    const auto& s = reply.payload.at("state");
    if (s.is_null()) return std::nullopt;
    return s.get<TaskState>();
}

std::vector<std::optional<TaskState>> RemoteResultBackend::get_states(const std::vector<TaskId>& ids) {
    const auto reply = rpc_->call("STATE_GET", json{{"ids", ids}});
    std::vector<std::optional<TaskState>> out;
    for (const auto& s : reply.payload.at("states")) {
        if (s.is_null()) {
            out.emplace_back();
        } else {
            out.emplace_back(s.get<TaskState>());
        }
    }
    return out;
}

void RemoteBlobStore::put(const std::string& key, std::string bytes) {
    rpc_->call("KV_PUT", json{{"key", key}, {"data", base64_encode(bytes)}});
}

void RemoteBlobStore::preload(const std::string& key, std::string bytes) {
    rpc_->call("KV_PUT", json{{"key", key}, {"data", base64_encode(bytes)}, {"preload", true}});
}

std::string RemoteBlobStore::get(const std::string& key) {
    return base64_decode(rpc_->call("KV_GET", json{{"key", key}}).payload.at("data").get<std::string>());
}

std::uint64_t RemoteBlobStore::transactions() const {
    return rpc_->call("PING").payload.at("store_transactions").get<std::uint64_t>();
}

EventForwarder::EventForwarder(std::shared_ptr<core::EventLog> local, std::shared_ptr<RpcClient> rpc,
                               std::chrono::milliseconds interval)
    : local_(std::move(local)), rpc_(std::move(rpc)), interval_(interval) {
    thread_ = std::thread([this] {
        while (!stop_) {
            std::this_thread::sleep_for(interval_);
            try {
                flush();
            } catch (const std::exception& e) {
                spdlog::warn("event forwarding failed: {}", e.what());
            }
        }
    });
}

EventForwarder::~EventForwarder() {
    stop_ = true;
    thread_.join();
    try {
        flush();
    } catch (const std::exception& e) {
        spdlog::warn("final event flush failed: {}", e.what());
    }
}

void EventForwarder::flush() {
    std::lock_guard lk(mu_);
    const auto all = local_->snapshot();
    if (sent_ >= all.size()) return;
    rpc_->call("EVENTS_APPEND", json{{"events", std::vector<core::Event>(all.begin() + sent_, all.end())}});
    sent_ = all.size();
}

std::vector<core::Event> fetch_events(RpcClient& rpc, std::size_t since) {
    return rpc.call("EVENTS_DUMP", json{{"since", since}}).payload.at("events").get<std::vector<core::Event>>();
}

ModelServer::ModelServer(Endpoint bind, std::shared_ptr<model::ModelClient> replica) : replica_(std::move(replica)) {
    server_ = std::make_unique<TcpServer>(std::move(bind), [this](const Message& m) { return handle(m); });
}

Message ModelServer::handle(const Message& req) {
    if (req.type == "PING") return ack();
    if (req.type != "INFER") throw UnknownTypeError(req.type);
    model::InferRequest r;
    try {
        r = req.payload.get<model::InferRequest>();
    } catch (const json::exception& e) {
        throw MalformedMessageError(std::string("INFER: ") + e.what());
    }
    return Message{"INFER_REPLY", "", json(replica_->infer(r))};
}

model::InferReply TcpModelClient::infer(const model::InferRequest& req) {
    return rpc_.call("INFER", json(req)).payload.get<model::InferReply>();
}

}  // namespace convbench::net
