// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "convbench/core/errors.hpp"

namespace convbench::net {

using json = nlohmann::json;

inline constexpr int kWireVersion = 1;

/// One envelope: {"v":1,"type":...,"id":...,"payload":{...}}.
struct Message {
    std::string type;
    std::string id;
    json payload = json::object();
};

class MalformedMessageError : public Error {
public:
    explicit MalformedMessageError(const std::string& why) : Error("malformed", why) {}
};

/// Single line including the trailing '\n'.
class UnknownTypeError : public Error {
public:
    explicit UnknownTypeError(const std::string& type) : Error("unknown_type", "unknown message type: " + type) {}
};

std::string encode(const Message& m);
/// Throws MalformedMessageError on bad JSON, a missing field or another version.
Message decode(std::string_view line);

Message error_message(const std::string& id, const std::string& code, const std::string& text, json extra = {});
/// Rethrows an ERROR envelope as the matching local error type.
[[noreturn]] void raise(const Message& error);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace convbench::net
