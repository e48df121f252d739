// SPDX-License-Identifier: Apache-2.0
#include "convbench/net/wire.hpp"

#include <openssl/evp.h>

namespace convbench::net {

std::string encode(const Message& m) {
    json j{{"v", kWireVersion}, {"type", m.type}, {"id", m.id}, {"payload", m.payload}};
    std::string out = j.dump();
    out.push_back('\n');
    return out;
}

Message decode(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw MalformedMessageError("not a JSON object");
    if (!j.contains("v") || j["v"] != kWireVersion) throw MalformedMessageError("unsupported protocol version");
    if (!j.contains("type") || !j["type"].is_string()) throw MalformedMessageError("missing type");
    Message m;
    m.type = j["type"].get<std::string>();
    if (j.contains("id")) {
        if (!j["id"].is_string()) throw MalformedMessageError("id must be a string");
        m.id = j["id"].get<std::string>();
    }
    if (j.contains("payload")) {
        if (!j["payload"].is_object()) throw MalformedMessageError("payload must be an object");
        m.payload = std::move(j["payload"]);
    }
    return m;
}

Message error_message(const std::string& id, const std::string& code, const std::string& text, json extra) {
    Message m{"ERROR", id, json{{"code", code}, {"message", text}}};
    if (extra.is_object()) m.payload.update(extra);
    return m;
}

void raise(const Message& error) {
    const auto& p = error.payload;
    throw_for_code(p.value("code", std::string("transport")), p.value("message", std::string()),
                   p.value("current_state", std::string()));
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw MalformedMessageError("base64 length is not a multiple of 4");
    std::string out(3 * text.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) throw MalformedMessageError("invalid base64");
    // DecodeBlock keeps the bytes that padding stands for; drop them.
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

}  // namespace convbench::net
