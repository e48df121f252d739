// SPDX-License-Identifier: Apache-2.0
#include "convbench/net/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <spdlog/spdlog.h>

namespace convbench::net {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

addrinfo* resolve(const Endpoint& ep, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(ep.port);
    const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) throw TransportError("cannot resolve " + ep.str() + ": " + ::gai_strerror(rc));
    return res;
}

}  // namespace

Endpoint Endpoint::parse(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw InvalidArgumentError("expected host:port, got '" + s + "'");
    Endpoint ep;
    if (colon > 0) ep.host = s.substr(0, colon);
    try {
        ep.port = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw InvalidArgumentError("bad port in '" + s + "'");
    }
    if (ep.port < 0 || ep.port > 65535) throw InvalidArgumentError("port out of range in '" + s + "'");
    return ep;
}

LineChannel::LineChannel(int fd) : fd_(fd) {}

LineChannel::~LineChannel() {
    if (fd_ >= 0) ::close(fd_);
}

void LineChannel::send(const Message& m) { send_raw(encode(m)); }

void LineChannel::send_raw(std::string_view bytes) {
    while (!bytes.empty()) {
        const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("send"));
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::optional<std::string> LineChannel::read_line() {
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        char chunk[8192];
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n == 0) return std::nullopt;
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == ECONNRESET || errno == EBADF) return std::nullopt;
            throw TransportError(errno_text("recv"));
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void LineChannel::shutdown() { ::shutdown(fd_, SHUT_RDWR); }

std::unique_ptr<LineChannel> connect_to(const Endpoint& ep) {
    addrinfo* res = resolve(ep, false);
    int fd = -1;
    for (addrinfo* a = res; a; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw TransportError("cannot connect to " + ep.str() + ": " + std::strerror(errno));
    set_nodelay(fd);
    return std::make_unique<LineChannel>(fd);
}

TcpServer::TcpServer(Endpoint bind, Handler handler) : host_(bind.host), handler_(std::move(handler)) {
    addrinfo* res = resolve(bind, true);
    listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (listen_fd_ < 0) {
        ::freeaddrinfo(res);
        throw TransportError(errno_text("socket"));
    }
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 128) != 0) {
        const std::string why = errno_text("bind/listen");
        ::freeaddrinfo(res);
        ::close(listen_fd_);
        throw TransportError(why + " on " + bind.str());
    }
    ::freeaddrinfo(res);
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    {
        std::lock_guard lk(conns_mu_);
        for (auto& c : conns_) c.channel->shutdown();
    }
    reap(true);
}

void TcpServer::reap(bool all) {
    std::list<Conn> finished;
    {
        std::lock_guard lk(conns_mu_);
        for (auto it = conns_.begin(); it != conns_.end();) {
            auto next = std::next(it);
            if (all || it->done) finished.splice(finished.end(), conns_, it);
            it = next;
        }
    }
    for (auto& c : finished) c.thread.join();
}

void TcpServer::accept_loop() {
    while (!stopping_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            if (stopping_) return;
            spdlog::warn("accept failed: {}", std::strerror(errno));
            continue;
        }
        set_nodelay(fd);
        reap(false);
        std::lock_guard lk(conns_mu_);
        auto& c = conns_.emplace_back();
        c.channel = std::make_unique<LineChannel>(fd);
        c.thread = std::thread([this, &c] { serve(c); });
    }
}

void TcpServer::serve(Conn& c) {
    try {
        while (auto line = c.channel->read_line()) {
            if (line->empty()) continue;
            Message reply;
            std::string id;
            try {
                Message req = decode(*line);
                id = req.id;
                reply = handler_(req);
                reply.id = id;
            } catch (const IllegalTransitionError& e) {
                reply = error_message(id, e.code(), e.what(), json{{"current_state", e.current_state()}});
            } catch (const Error& e) {
                reply = error_message(id, e.code(), e.what());
            } catch (const std::exception& e) {
                reply = error_message(id, "internal", e.what());
            }
            c.channel->send(reply);
        }
    } catch (const std::exception& e) {
        if (!stopping_) spdlog::debug("connection dropped: {}", e.what());
    }
    c.done = true;
}

RpcClient::RpcClient(Endpoint ep, std::size_t max_idle) : ep_(std::move(ep)), max_idle_(max_idle) {}

std::unique_ptr<LineChannel> RpcClient::take() {
    {
        std::lock_guard lk(mu_);
        if (!idle_.empty()) {
            auto c = std::move(idle_.back());
            idle_.pop_back();
            return c;
        }
    }
    return connect_to(ep_);
}

void RpcClient::give_back(std::unique_ptr<LineChannel> c) {
    std::lock_guard lk(mu_);
    if (idle_.size() < max_idle_) idle_.push_back(std::move(c));
}

Message RpcClient::call(const std::string& type, json payload) {
    Message req{type, std::to_string(next_id_.fetch_add(1)), std::move(payload)};
    const std::string line = encode(req);
    // A pooled connection may have been closed by the peer; retry once on a fresh one.
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto ch = attempt == 0 ? take() : connect_to(ep_);
        std::optional<std::string> got;
        try {
            ch->send_raw(line);
            got = ch->read_line();
        } catch (const TransportError&) {
            if (attempt == 1) throw;
            continue;
        }
        if (!got) {
            if (attempt == 1) throw TransportError("connection closed by " + ep_.str());
            continue;
        }
        Message reply = decode(*got);
        give_back(std::move(ch));
        if (reply.type == "ERROR") raise(reply);
        return reply;
    }
    throw TransportError("unreachable: " + ep_.str());
}

}  // namespace convbench::net
