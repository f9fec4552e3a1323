#pragma once

// Control envelopes exchanged beside AgentMessage frames on a TCP connection.
//
// Any line whose JSON object has an "op" key is a control envelope; every
// other line is an AgentMessage frame. Client requests on one connection are
// answered with exactly one {"op":"reply"} each, in order.

#include <string>
#include <string_view>

#include "json.hpp"

#include "agentnet/error.hpp"

namespace agentnet::wire {

inline constexpr std::string_view kConnect = "connect";
inline constexpr std::string_view kSearch = "search";
inline constexpr std::string_view kSetupGroup = "setup_group";
inline constexpr std::string_view kGetProfile = "get_profile";
inline constexpr std::string_view kTranscript = "transcript";
inline constexpr std::string_view kReply = "reply";
inline constexpr std::string_view kKickoff = "kickoff";
/// Server to client: everything for this run has been delivered.
inline constexpr std::string_view kFinish = "finish";

std::string to_line(const nlohmann::json& envelope);

nlohmann::json reply_ok(nlohmann::json result = nlohmann::json::object());
nlohmann::json reply_error(const Error& error);

/// Returns the result of an ok reply, throws the carried Error otherwise.
nlohmann::json unwrap_reply(const nlohmann::json& reply);

bool is_control(const nlohmann::json& j);

} // namespace agentnet::wire
