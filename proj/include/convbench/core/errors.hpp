// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace convbench {

/// Base for every error the library raises. `code()` is the stable string
/// used on the wire ({"type":"ERROR","payload":{"code":...}}).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Tag for rebuilding an error from a message that already has its prefix
/// (used when an error crosses the wire).
struct Verbatim {};

class DuplicateTaskError : public Error {
public:
    DuplicateTaskError(Verbatim, const std::string& message) : Error("duplicate", message) {}
    explicit DuplicateTaskError(const std::string& id)
        : Error("duplicate", "task already enqueued: " + id) {}
};

class QueueFullError : public Error {
public:
    QueueFullError(Verbatim, const std::string& message) : Error("queue_full", message) {}
    explicit QueueFullError(const std::string& queue)
        : Error("queue_full", "queue is at capacity: " + queue) {}
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& what) : Error("not_found", what) {}
};

class IllegalTransitionError : public Error {
public:
    IllegalTransitionError(const std::string& message, std::string current_state_json)
        : Error("illegal_transition", message), current_(std::move(current_state_json)) {}

    /// Serialized TaskState that was current when the write was rejected.
    const std::string& current_state() const noexcept { return current_; }

private:
    std::string current_;
};

class TransportError : public Error {
public:
    explicit TransportError(const std::string& message) : Error("transport", message) {}
};

class UnknownDatasetError : public Error {
public:
    UnknownDatasetError(Verbatim, const std::string& message) : Error("unknown_dataset", message) {}
    explicit UnknownDatasetError(const std::string& name)
        : Error("unknown_dataset", "unknown dataset: " + name) {}
};

class InvalidArgumentError : public Error {
public:
    explicit InvalidArgumentError(const std::string& message) : Error("invalid_argument", message) {}
};

class ModelBusyError : public Error {
public:
    ModelBusyError(Verbatim, const std::string& message) : Error("busy", message) {}
    explicit ModelBusyError(const std::string& replica)
        : Error("busy", "model replica queue is full: " + replica) {}
};

class UnavailableError : public Error {
public:
    explicit UnavailableError(const std::string& message) : Error("unavailable", message) {}
};

/// Thrown inside a task whose deadline expired; the worker has already
/// recorded it as timed out.
class TaskCancelled : public Error {
public:
    explicit TaskCancelled(const std::string& id) : Error("cancelled", "task cancelled: " + id) {}
};

/// Rethrows a wire error as the matching local type; unknown codes become
/// TransportError.
[[noreturn]] inline void throw_for_code(const std::string& code, const std::string& message,
                                        const std::string& current_state = {}) {
    if (code == "duplicate") throw DuplicateTaskError(Verbatim{}, message);
    if (code == "queue_full") throw QueueFullError(Verbatim{}, message);
    if (code == "not_found") throw NotFoundError(message);
    if (code == "illegal_transition") throw IllegalTransitionError(message, current_state);
    if (code == "unknown_dataset") throw UnknownDatasetError(Verbatim{}, message);
    if (code == "invalid_argument") throw InvalidArgumentError(message);
    if (code == "busy") throw ModelBusyError(Verbatim{}, message);
    if (code == "unavailable") throw UnavailableError(message);
    throw TransportError(code + ": " + message);
}

}  // namespace convbench
