#include "agentnet/protocol.hpp"

#include <set>

#include "agentnet/error.hpp"
#include "utf8.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

constexpr std::string_view kKindNames[] = {
    "discussion",      "sync_task_assignment", "async_task_assignment", "pause_and_trigger",
    "conclusion",      "task_result",          "system_notice",
};

void check_names(std::vector<Violation>& out, std::string_view field, const std::vector<std::string>& names) {
    std::set<std::string_view> seen;
    for (const auto& n : names) {
        if (n.empty()) out.push_back({std::string(field), "entries must be non-empty"});
        if (!seen.insert(n).second) out.push_back({std::string(field), "entries must be distinct"});
    }
}

void check_utf8_text(std::vector<Violation>& out, std::string_view field, std::string_view s) {
    if (!detail::is_valid_utf8(s)) out.push_back({std::string(field), "must be valid UTF-8"});
}

void check_utf8(std::vector<Violation>& out, std::string_view field, const std::string& s) {
    check_utf8_text(out, field, s);
}

void check_utf8(std::vector<Violation>& out, std::string_view field, const std::optional<std::string>& s) {
    if (s) check_utf8(out, field, *s);
}

void check_utf8(std::vector<Violation>& out, std::string_view field, const std::vector<std::string>& v) {
    for (const auto& s : v) check_utf8(out, field, s);
}

std::string join_violations(const std::vector<Violation>& vs) {
    std::string out;
    for (const auto& v : vs) {
        if (!out.empty()) out += "; ";
        out += v.field + " " + v.rule;
    }
    return out;
}

// Records duplicate keys, which json::parse would otherwise collapse.
struct DuplicateKeyTracker {
    std::vector<std::set<std::string>> stack;
    bool duplicate = false;

    bool operator()(int /*depth*/, json::parse_event_t event, json& parsed) {
        switch (event) {
        case json::parse_event_t::object_start:
            stack.emplace_back();
            break;
        case json::parse_event_t::object_end:
            if (!stack.empty()) stack.pop_back();
            break;
        case json::parse_event_t::key:
            if (!stack.empty() && !stack.back().insert(parsed.get<std::string>()).second) duplicate = true;
            break;
        default:
            break;
        }
        return true;
    }
};

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::SchemaViolation, what); }

void require_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> required,
                  std::initializer_list<std::string_view> optional) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (auto k : required) known = known || it.key() == k;
        for (auto k : optional) known = known || it.key() == k;
        if (!known) schema(std::string(where) + ": unknown key '" + it.key() + "'");
    }
    for (auto k : required) {
        if (!obj.contains(k)) schema(std::string(where) + ": missing key '" + std::string(k) + "'");
    }
}

std::string get_string(const json& obj, std::string_view key) {
    const auto& v = obj.at(key);
    if (!v.is_string()) schema(std::string(key) + " must be a string");
    return v.get<std::string>();
}

std::optional<std::string> opt_string(const json& obj, std::string_view key) {
    if (!obj.contains(key)) return std::nullopt;
    return get_string(obj, key);
}

std::vector<std::string> get_string_list(const json& obj, std::string_view key) {
    const auto& v = obj.at(key);
    if (!v.is_array()) schema(std::string(key) + " must be a list of strings");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_string()) schema(std::string(key) + " must be a list of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::optional<std::vector<std::string>> opt_string_list(const json& obj, std::string_view key) {
    if (!obj.contains(key)) return std::nullopt;
    return get_string_list(obj, key);
}

std::optional<std::int64_t> opt_int(const json& obj, std::string_view key) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (v.is_number_unsigned()) {
        auto u = v.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(INT64_MAX)) schema(std::string(key) + " out of range");
        return static_cast<std::int64_t>(u);
    }
    if (v.is_number_integer()) return v.get<std::int64_t>();
    schema(std::string(key) + " must be an integer");
}

} // namespace

std::string_view to_string(MessageKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<MessageKind> message_kind_from_string(std::string_view name) {
    for (int i = 0; i < 7; ++i) {
        if (kKindNames[i] == name) return static_cast<MessageKind>(i);
    }
    return std::nullopt;
}

std::string_view to_string(HeaderState state) {
    return state == HeaderState::team_formation ? "team_formation" : "communication";
}

std::vector<Violation> validate_message(const AgentMessage& msg) {
    std::vector<Violation> out;
    const auto& h = msg.header;
    const auto& p = msg.payload;

    if (h.sender.empty()) out.push_back({"header.sender", "must be non-empty"});
    if (h.state == HeaderState::communication && h.comm_id.empty())
        out.push_back({"header.comm_id", "must be non-empty when state is communication"});
    check_utf8(out, "header.sender", h.sender);
    check_utf8(out, "header.comm_id", h.comm_id);

    if (p.team_up_depth && *p.team_up_depth < 0) out.push_back({"payload.team_up_depth", "must be non-negative"});
    if (p.max_turns && *p.max_turns < 1) out.push_back({"payload.max_turns", "must be positive"});
    if (p.team_members) check_names(out, "payload.team_members", *p.team_members);
    check_names(out, "payload.next_speaker", p.next_speaker);
    if (p.triggers) check_names(out, "payload.triggers", *p.triggers);
    if (p.task_id && p.task_id->empty()) out.push_back({"payload.task_id", "must be non-empty when present"});

    check_utf8(out, "payload.goal", p.goal);
    if (p.team_members) check_utf8(out, "payload.team_members", *p.team_members);
    check_utf8(out, "payload.content", p.content);
    check_utf8(out, "payload.next_speaker", p.next_speaker);
    check_utf8(out, "payload.task_id", p.task_id);
    check_utf8(out, "payload.task_desc", p.task_desc);
    check_utf8(out, "payload.task_conclusion", p.task_conclusion);
    check_utf8(out, "payload.task_abstract", p.task_abstract);
    if (p.triggers) check_utf8(out, "payload.triggers", *p.triggers);

    switch (p.kind) {
    case MessageKind::discussion:
        if (p.next_speaker.size() > 1) out.push_back({"payload.next_speaker", "discussion allows at most one speaker"});
        break;
    case MessageKind::sync_task_assignment:
    case MessageKind::async_task_assignment:
        if (p.next_speaker.empty()) out.push_back({"payload.next_speaker", "assignment needs at least one assignee"});
        if (!p.task_id) out.push_back({"payload.task_id", "assignment needs a task_id"});
        break;
    case MessageKind::pause_and_trigger:
        if (!p.triggers || p.triggers->empty()) out.push_back({"payload.triggers", "pause_and_trigger needs triggers"});
        break;
    case MessageKind::conclusion:
        if (!p.next_speaker.empty()) out.push_back({"payload.next_speaker", "conclusion has no next speaker"});
        if (!p.content || p.content->empty()) out.push_back({"payload.content", "conclusion needs content"});
        break;
    case MessageKind::task_result:
        if (!p.task_id) out.push_back({"payload.task_id", "task_result needs task_id"});
        if (!p.task_conclusion) out.push_back({"payload.task_conclusion", "task_result needs task_conclusion"});
        if (!p.task_abstract) out.push_back({"payload.task_abstract", "task_result needs task_abstract"});
        break;
    case MessageKind::system_notice:
        break;
    }
    return out;
}

json to_json(const AgentMessage& msg) {
    json header = {
        {"sender", msg.header.sender},
        {"state", std::string(to_string(msg.header.state))},
        {"comm_id", msg.header.comm_id},
    };
    const auto& p = msg.payload;
    json payload = json::object();
    if (p.goal) payload["goal"] = *p.goal;
    if (p.team_members) payload["team_members"] = *p.team_members;
    if (p.team_up_depth) payload["team_up_depth"] = *p.team_up_depth;
    if (p.max_turns) payload["max_turns"] = *p.max_turns;
    if (p.content) payload["content"] = *p.content;
    payload["kind"] = std::string(to_string(p.kind));
    payload["next_speaker"] = p.next_speaker;
    if (p.task_id) payload["task_id"] = *p.task_id;
    if (p.task_desc) payload["task_desc"] = *p.task_desc;
    if (p.task_conclusion) payload["task_conclusion"] = *p.task_conclusion;
    if (p.task_abstract) payload["task_abstract"] = *p.task_abstract;
    if (p.triggers) payload["triggers"] = *p.triggers;

    json out = {{"header", std::move(header)}, {"payload", std::move(payload)}};
    if (msg.seq) out["seq"] = *msg.seq;
    return out;
}

std::string encode_message(const AgentMessage& msg) {
    auto violations = validate_message(msg);
    if (!violations.empty()) throw Error(ErrorCode::ValidationFailed, join_violations(violations));
    // json objects are std::map backed, so keys come out sorted.
    std::string out = to_json(msg).dump(-1, ' ', false, json::error_handler_t::strict);
    out.push_back('\n');
    return out;
}

AgentMessage message_from_json(const json& j) {
    if (!j.is_object()) schema("frame must be a JSON object");
    require_keys(j, "frame", {"header", "payload"}, {"seq"});

    const auto& jh = j.at("header");
    if (!jh.is_object()) schema("header must be an object");
    require_keys(jh, "header", {"sender", "state", "comm_id"}, {});

    const auto& jp = j.at("payload");
    if (!jp.is_object()) schema("payload must be an object");
    require_keys(jp, "payload", {"kind", "next_speaker"},
                 {"goal", "team_members", "team_up_depth", "max_turns", "content", "task_id", "task_desc",
                  "task_conclusion", "task_abstract", "triggers"});

    AgentMessage msg;
    msg.header.sender = get_string(jh, "sender");
    auto state = get_string(jh, "state");
    if (state == "team_formation") {
        msg.header.state = HeaderState::team_formation;
    } else if (state == "communication") {
        msg.header.state = HeaderState::communication;
    } else {
        schema("header.state '" + state + "' is not a known state");
    }
    msg.header.comm_id = get_string(jh, "comm_id");

    auto& p = msg.payload;
    auto kind_name = get_string(jp, "kind");
    auto kind = message_kind_from_string(kind_name);
    if (!kind) schema("payload.kind '" + kind_name + "' is not a known kind");
    p.kind = *kind;
    p.next_speaker = get_string_list(jp, "next_speaker");
    p.goal = opt_string(jp, "goal");
    p.team_members = opt_string_list(jp, "team_members");
    p.team_up_depth = opt_int(jp, "team_up_depth");
    p.max_turns = opt_int(jp, "max_turns");
    p.content = opt_string(jp, "content");
    p.task_id = opt_string(jp, "task_id");
    p.task_desc = opt_string(jp, "task_desc");
    p.task_conclusion = opt_string(jp, "task_conclusion");
    p.task_abstract = opt_string(jp, "task_abstract");
    p.triggers = opt_string_list(jp, "triggers");

    if (j.contains("seq")) {
        const auto& s = j.at("seq");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
            schema("seq must be a non-negative integer");
        msg.seq = s.get<std::uint64_t>();
    }

    auto violations = validate_message(msg);
    if (!violations.empty()) throw Error(ErrorCode::ValidationFailed, join_violations(violations));
    return msg;
}

AgentMessage decode_message(std::string_view frame) {
    if (frame.empty() || frame.back() != '\n') throw Error(ErrorCode::MalformedFrame, "frame must end with a newline");
    auto body = frame.substr(0, frame.size() - 1);
    if (body.find('\n') != std::string_view::npos)
        throw Error(ErrorCode::MalformedFrame, "frame must be a single line");

    DuplicateKeyTracker tracker;
    json j;
    try {
        j = json::parse(body.begin(), body.end(), std::ref(tracker));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFrame, e.what());
    }
    if (tracker.duplicate) throw Error(ErrorCode::SchemaViolation, "duplicate key in frame");
    return message_from_json(j);
}

std::string assignee_task_id(std::string_view assignment_id, std::string_view assignee) {
    std::string out(assignment_id);
    out.push_back('/');
    out.append(assignee);
    return out;
}

std::string make_task_abstract(std::string_view conclusion) {
    std::string flat;
    flat.reserve(std::min<std::size_t>(conclusion.size(), 1024));
    std::size_t code_points = 0;
    for (std::size_t i = 0; i < conclusion.size() && code_points < 200;) {
        auto len = detail::utf8_sequence_length(static_cast<unsigned char>(conclusion[i]));
        if (len == 0 || i + len > conclusion.size()) len = 1;
        char c = conclusion[i];
        if (len == 1 && (c == '\n' || c == '\r' || c == '\t')) {
            flat.push_back(' ');
        } else {
            flat.append(conclusion.substr(i, len));
        }
        i += len;
        ++code_points;
    }
    if (flat.empty()) flat = "(empty result)";
    return flat;
}

AgentMessage make_discussion(std::string sender, std::string comm_id, std::string content,
                             std::vector<std::string> next_speaker) {
    AgentMessage m;
    m.header = {std::move(sender), HeaderState::communication, std::move(comm_id)};
    m.payload.kind = MessageKind::discussion;
    m.payload.content = std::move(content);
    m.payload.next_speaker = std::move(next_speaker);
    return m;
}

AgentMessage make_task_result(std::string sender, std::string comm_id, std::string task_id, std::string conclusion) {
    AgentMessage m;
    m.header = {std::move(sender), HeaderState::communication, std::move(comm_id)};
    m.payload.kind = MessageKind::task_result;
    m.payload.task_id = std::move(task_id);
    m.payload.task_abstract = make_task_abstract(conclusion);
    m.payload.task_conclusion = std::move(conclusion);
    return m;
}

} // namespace agentnet
