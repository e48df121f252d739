// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "convbench/net/wire.hpp"

namespace convbench::net {

struct Endpoint {
    std::string host = "127.0.0.1";
    int port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
    /// "host:port" or ":port".
    static Endpoint parse(const std::string& s);
};

/// A connected stream socket speaking newline-delimited messages.
class LineChannel {
public:
    explicit LineChannel(int fd);
    ~LineChannel();
    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;

    void send(const Message& m);
    void send_raw(std::string_view bytes);
    /// Next full line without the newline; empty optional on EOF.
    std::optional<std::string> read_line();
    void shutdown();

private:
    int fd_;
    std::string buffer_;
};

std::unique_ptr<LineChannel> connect_to(const Endpoint& ep);

/// Thread-per-connection server. The handler maps one request to one reply;
/// exceptions become ERROR replies with the error's code.
class TcpServer {
public:
    using Handler = std::function<Message(const Message&)>;

    TcpServer(Endpoint bind, Handler handler);
    ~TcpServer();
    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    /// Actual port (useful when bound to port 0).
    int port() const { return port_; }
    Endpoint endpoint() const { return {host_, port_}; }
    void stop();

private:
    struct Conn {
        std::unique_ptr<LineChannel> channel;
        std::thread thread;
        std::atomic<bool> done{false};
    };
    void accept_loop();
    void serve(Conn& c);
    void reap(bool all);

    std::string host_;
    int port_ = 0;
    int listen_fd_ = -1;
    Handler handler_;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex conns_mu_;
    std::list<Conn> conns_;
};

/// Request/reply over a small pool of persistent connections.
class RpcClient {
public:
    explicit RpcClient(Endpoint ep, std::size_t max_idle = 16);

    /// Sends `type` and returns the reply. ERROR replies are rethrown as
    /// local errors; connection failures as TransportError.
    Message call(const std::string& type, json payload = json::object());

    const Endpoint& endpoint() const { return ep_; }

private:
    std::unique_ptr<LineChannel> take();
    void give_back(std::unique_ptr<LineChannel> c);

    Endpoint ep_;
    std::size_t max_idle_;
    std::mutex mu_;
    std::vector<std::unique_ptr<LineChannel>> idle_;
    std::atomic<std::uint64_t> next_id_{0};
};

}  // namespace convbench::net
