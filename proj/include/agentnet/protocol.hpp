#pragma once

// Agent message schema and its canonical NDJSON encoding.
//
// A frame is one UTF-8 JSON object with lexicographically ordered keys,
// absent optionals omitted, terminated by a single '\n'.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace agentnet {

enum class MessageKind {
    discussion,
    sync_task_assignment,
    async_task_assignment,
    pause_and_trigger,
    conclusion,
    task_result,
    system_notice,
};

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> message_kind_from_string(std::string_view name);

/// Conversation kinds advance the turn counter; task_result and
/// system_notice are plumbing.
constexpr bool is_conversation_kind(MessageKind kind) {
    return kind != MessageKind::task_result && kind != MessageKind::system_notice;
}

constexpr bool is_assignment_kind(MessageKind kind) {
    return kind == MessageKind::sync_task_assignment || kind == MessageKind::async_task_assignment;
}

enum class HeaderState { team_formation, communication };

std::string_view to_string(HeaderState state);

/// Sender name used for frames the server itself originates.
inline constexpr std::string_view kServerSender = "@server";

struct MessageHeader {
    std::string sender;
    HeaderState state = HeaderState::communication;
    std::string comm_id;

    bool operator==(const MessageHeader&) const = default;
};

struct MessagePayload {
    std::optional<std::string> goal;
    std::optional<std::vector<std::string>> team_members;
    std::optional<std::int64_t> team_up_depth;
    std::optional<std::int64_t> max_turns;
    std::optional<std::string> content;
    MessageKind kind = MessageKind::discussion;
    std::vector<std::string> next_speaker;
    std::optional<std::string> task_id;
    std::optional<std::string> task_desc;
    std::optional<std::string> task_conclusion;
    std::optional<std::string> task_abstract;
    std::optional<std::vector<std::string>> triggers;

    bool operator==(const MessagePayload&) const = default;
};

struct AgentMessage {
    MessageHeader header;
    MessagePayload payload;
    std::optional<std::uint64_t> seq;

    bool operator==(const AgentMessage&) const = default;
};

struct Violation {
    std::string field;
    std::string rule;

    bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_message(const AgentMessage& msg);

/// Throws Error(ValidationFailed) if validate_message reports anything.
std::string encode_message(const AgentMessage& msg);

/// Throws Error(MalformedFrame | SchemaViolation | ValidationFailed).
AgentMessage decode_message(std::string_view frame);

/// JSON object form of a message (no validation, no trailing newline).
nlohmann::json to_json(const AgentMessage& msg);

/// Strict schema parse of an already-parsed JSON object, then validation.
AgentMessage message_from_json(const nlohmann::json& j);

/// Task id owned by one assignee of an assignment frame.
std::string assignee_task_id(std::string_view assignment_id, std::string_view assignee);

/// Single-line prefix of at most 200 characters (UTF-8 code points).
std::string make_task_abstract(std::string_view conclusion);

// Builders for the common frame shapes.
AgentMessage make_discussion(std::string sender, std::string comm_id, std::string content,
                             std::vector<std::string> next_speaker);
AgentMessage make_task_result(std::string sender, std::string comm_id, std::string task_id,
                              std::string conclusion);

} // namespace agentnet
