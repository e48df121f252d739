// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "convbench/core/errors.hpp"
#include "convbench/core/worker.hpp"
#include "convbench/model/layout.hpp"
#include "convbench/net/services.hpp"

using namespace convbench;
using namespace convbench::core;
using namespace convbench::net;

namespace {

struct Served {
    Served() {
        broker = std::make_shared<InMemoryBroker>();
        backend = std::make_shared<InMemoryResultBackend>();
        store = std::make_shared<LocalBlobStore>(StoreConfig{0.0}, TimeScale{});
        events = std::make_shared<EventLog>();
        server = std::make_unique<BrokerServer>(Endpoint{"127.0.0.1", 0}, broker, backend, store, events);
        rpc = std::make_shared<RpcClient>(server->endpoint());
    }
    std::shared_ptr<InMemoryBroker> broker;
    std::shared_ptr<InMemoryResultBackend> backend;
    std::shared_ptr<LocalBlobStore> store;
    std::shared_ptr<EventLog> events;
    std::unique_ptr<BrokerServer> server;
    std::shared_ptr<RpcClient> rpc;
};

Message raw_exchange(const Endpoint& ep, const std::string& line) {
    auto ch = connect_to(ep);
    ch->send_raw(line);
    auto got = ch->read_line();
    REQUIRE(got);
    return decode(*got);
}

Co<json> fan_out(std::shared_ptr<TaskContext> ctx, json p) {
    const int n = p.value("n", 0);
    if (n == 0) {
        co_await ctx->store_blob(ctx->task().id.str(), "leaf", "test");
        co_return json{{"leaves", 1}};
    }
    std::vector<SubtaskSpec> specs(static_cast<std::size_t>(n), SubtaskSpec{"fan", json{{"n", 0}}});
    SubtaskStream stream(ctx, std::move(specs), 2);
    int leaves = 0;
    while (auto s = co_await stream.next()) leaves += s->result.at("leaves").get<int>();
    co_return json{{"leaves", leaves}};
}

}  // namespace

TEST_CASE("envelope round trip") {
    Message m{"FETCH", "17", json{{"worker", "w1"}, {"limit", 4}}};
    const auto line = encode(m);
    CHECK(line.back() == '\n');
    CHECK(json::parse(line)["v"] == 1);
    const auto back = decode(line);
    CHECK(back.type == "FETCH");
    CHECK(back.id == "17");
    CHECK(back.payload == m.payload);
}

TEST_CASE("malformed envelopes are rejected") {
    CHECK_THROWS_AS(decode("not json"), MalformedMessageError);
    CHECK_THROWS_AS(decode(R"({"v":1,"id":"1"})"), MalformedMessageError);
    CHECK_THROWS_AS(decode(R"({"v":2,"type":"PING"})"), MalformedMessageError);
    CHECK_THROWS_AS(decode(R"({"v":1,"type":"PING","payload":[1]})"), MalformedMessageError);
}

TEST_CASE("property: base64 round-trips arbitrary bytes") {
    std::mt19937 rng(5);
    for (std::size_t len = 0; len < 64; ++len) {
        std::string bytes(len, '\0');
        for (auto& c : bytes) c = static_cast<char>(rng() & 0xff);
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK_THROWS_AS(base64_decode("abc"), MalformedMessageError);
}

TEST_CASE("unknown type and malformed lines get ERROR replies") {
    Served s;
    const auto unknown = raw_exchange(s.server->endpoint(), R"({"v":1,"type":"FROB","id":"x","payload":{}})" "\n");
    CHECK(unknown.type == "ERROR");
    CHECK(unknown.id == "x");
    CHECK(unknown.payload["code"] == "unknown_type");
    const auto bad = raw_exchange(s.server->endpoint(), "{{{\n");
    CHECK(bad.type == "ERROR");
    CHECK(bad.payload["code"] == "malformed");
    const auto missing = raw_exchange(s.server->endpoint(), R"({"v":1,"type":"ACK","id":"y","payload":{}})" "\n");
    CHECK(missing.payload["code"] == "malformed");
}

TEST_CASE("remote broker: FIFO, duplicate rejection and ack over the wire") {
    Served s;
    RemoteBroker broker(s.rpc);
    Task t1{TaskId{"j", "0.0"}, "k"};
    Task t2{TaskId{"j", "0.1"}, "k"};
    broker.enqueue(t1);
    broker.enqueue(t2);
    CHECK_THROWS_AS(broker.enqueue(t1), DuplicateTaskError);
    CHECK(broker.depth() == 2);
    auto got = broker.fetch("w", 1);
    REQUIRE(got.size() == 1);
    CHECK(got[0].id == t1.id);
    broker.ack("w", t1.id);
    broker.heartbeat("w");
    CHECK(broker.fetch("w", 5).at(0).id == t2.id);
    CHECK(broker.fetch("w", 5).empty());
}

TEST_CASE("remote backend keeps transition rules and reports the current state") {
    Served s;
    RemoteResultBackend backend(s.rpc);
    const TaskId id{"j", "0"};
    backend.set_state(TaskState{id, TaskStatus::queued});
    backend.set_state(TaskState{id, TaskStatus::running, 1, "w"});
    backend.set_state(TaskState{id, TaskStatus::succeeded, 1, "w"});
    CHECK(backend.get_state(id)->status == TaskStatus::succeeded);
    CHECK_FALSE(backend.get_state(TaskId{"j", "9"}));
    try {
        backend.set_state(TaskState{id, TaskStatus::running, 1, "w"});
        FAIL("expected rejection");
    } catch (const IllegalTransitionError& e) {
        CHECK(json::parse(e.current_state())["status"] == "succeeded");
    }
    const auto many = backend.get_states({id, TaskId{"j", "9"}});
    CHECK(many.size() == 2);
    CHECK(many[0]);
    CHECK_FALSE(many[1]);
}

TEST_CASE("remote store round-trips binary blobs and counts every call") {
    Served s;
    RemoteBlobStore store(s.rpc);
    std::string bytes("\0\x01\xff\n{}", 6);
    store.put("j/a", bytes);
    CHECK(store.get("j/a") == bytes);
    CHECK_THROWS_AS(store.get("j/missing"), NotFoundError);
    store.preload("j/in", "x");
    CHECK(store.transactions() == 3);
    CHECK(s.store->transactions() == 3);
}

TEST_CASE("model server answers INFER like the local replica") {
    model::ModelEndpointConfig cfg;
    cfg.infer_duration_s = 0.5;
    auto replica = std::make_shared<model::LocalReplica>(cfg);
    ModelServer server(Endpoint{"127.0.0.1", 0}, replica);
    TcpModelClient client(server.endpoint());
    model::InferRequest req;
    req.doc_id = "d";
    req.seed = 123;
    req.tables = 1;
    const auto reply = client.infer(req);
    CHECK(reply.regions == model::generate_layout(123, 1));
    CHECK(reply.duration_ms == doctest::Approx(500.0));
    const auto bad = raw_exchange(server.endpoint(), R"({"v":1,"type":"INFER","id":"z","payload":{"seed":1}})" "\n");
    CHECK(bad.payload["code"] == "malformed");
}

TEST_CASE("workers in a separate address space complete a job over TCP") {
    Served s;
    auto registry = std::make_shared<HandlerRegistry>();
    registry->add("fan", fan_out);
    auto local_events = std::make_shared<EventLog>();
    WorkerEnv env{std::make_shared<RemoteBroker>(s.rpc), std::make_shared<RemoteResultBackend>(s.rpc),
                  std::make_shared<RemoteBlobStore>(s.rpc), local_events, registry, TimeScale{}};
    std::vector<std::unique_ptr<Worker>> workers;
    for (int i = 0; i < 2; ++i) {
        WorkerConfig c;
        c.worker_id = "remote-" + std::to_string(i);
        workers.push_back(std::make_unique<Worker>(c, env));
    }
    {
        EventForwarder forward(local_events, s.rpc);
        for (auto& w : workers) w->start();
        Client client(env, "tcp");
        const auto job = client.submit("fan", json{{"n", 5}});
        const auto root = client.wait(job, std::chrono::seconds(30));
        for (auto& w : workers) w->stop();
        REQUIRE(root);
        CHECK(root->status == TaskStatus::succeeded);
        CHECK(root->result["leaves"] == 5);
    }
    CHECK(s.store->transactions() == 5);
    const auto shipped = fetch_events(*s.rpc);
    CHECK(shipped.size() == local_events->size());
    std::size_t finished = 0;
    for (const auto& e : shipped) finished += e.kind == EventKind::task_finished;
    CHECK(finished == 6);
}
