#include "agentnet/wire.hpp"

namespace agentnet::wire {

using nlohmann::json;

std::string to_line(const json& envelope) {
    auto line = envelope.dump(-1, ' ', false, json::error_handler_t::replace);
    line.push_back('\n');
    return line;
}

json reply_ok(json result) { return {{"op", kReply}, {"ok", true}, {"result", std::move(result)}}; }

json reply_error(const Error& error) {
    return {{"op", kReply}, {"ok", false}, {"error", {{"code", to_string(error.code())}, {"message", error.detail()}}}};
}

json unwrap_reply(const json& reply) {
    if (!reply.is_object() || reply.value("op", std::string{}) != kReply)
        throw Error(ErrorCode::MalformedFrame, "expected a reply envelope");
    if (reply.value("ok", false)) return reply.value("result", json::object());
    const auto& err = reply.value("error", json::object());
    throw Error(error_code_from_string(err.value("code", std::string{"Io"})), err.value("message", std::string{}));
}

bool is_control(const json& j) { return j.is_object() && j.contains("op"); }

} // namespace agentnet::wire
