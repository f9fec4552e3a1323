#include "agentnet/policy.hpp"

#include "agentnet/error.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const json& record, const std::string& what) {
    throw Error(ErrorCode::ScenarioInvalid, what + " in script record " + record.dump());
}

void require_string_list(const json& record, const char* key, bool required) {
    if (!record.contains(key)) {
        if (required) invalid(record, std::string("missing '") + key + "'");
        return;
    }
    const auto& v = record.at(key);
    if (!v.is_array()) invalid(record, std::string("'") + key + "' must be a list");
    for (const auto& e : v) {
        if (!e.is_string() || e.get<std::string>().empty())
            invalid(record, std::string("'") + key + "' entries must be non-empty strings");
    }
}

void require_string(const json& record, const char* key, bool required) {
    if (!record.contains(key)) {
        if (required) invalid(record, std::string("missing '") + key + "'");
        return;
    }
    if (!record.at(key).is_string()) invalid(record, std::string("'") + key + "' must be a string");
}

std::vector<std::string> strings(const json& record, const char* key) {
    return record.contains(key) ? record.at(key).get<std::vector<std::string>>() : std::vector<std::string>{};
}

} // namespace

void validate_script_record(const json& record) {
    if (!record.is_object()) invalid(record, "record must be an object");
    require_string(record, "goal", true);
    require_string(record, "action", true);
    const auto action = record.at("action").get<std::string>();
    if (action == "search") {
        require_string_list(record, "characteristics", true);
        if (record.at("characteristics").empty()) invalid(record, "search needs at least one characteristic");
    } else if (action == "launch") {
        require_string_list(record, "members", false);
    } else if (action == "utter") {
        require_string(record, "kind", true);
        auto kind = message_kind_from_string(record.at("kind").get<std::string>());
        if (!kind || !is_conversation_kind(*kind)) invalid(record, "'kind' must be a conversation kind");
        require_string(record, "content", *kind != MessageKind::conclusion);
        require_string_list(record, "next_speakers", false);
        require_string_list(record, "triggers", *kind == MessageKind::pause_and_trigger);
    } else if (action == "summarize") {
        require_string(record, "task_desc", true);
        if (record.contains("delegate") && !record.at("delegate").is_boolean()) invalid(record, "'delegate' must be a bool");
    } else if (action == "conclude") {
        require_string(record, "content", true);
    } else {
        invalid(record, "unknown action '" + action + "'");
    }
}

ScriptedPolicy::ScriptedPolicy(const json& script) {
    if (script.is_null()) return;
    if (!script.is_array()) throw Error(ErrorCode::ScenarioInvalid, "script must be a list of records");
    for (const auto& record : script) {
        validate_script_record(record);
        by_goal_[record.at("goal").get<std::string>()].push_back(record);
    }
}

const json* ScriptedPolicy::peek(const std::string& goal) const {
    auto it = by_goal_.find(goal);
    if (it == by_goal_.end()) return nullptr;
    auto c = cursor_.find(goal);
    std::size_t i = c == cursor_.end() ? 0 : c->second;
    return i < it->second.size() ? &it->second[i] : nullptr;
}

const json& ScriptedPolicy::take(const std::string& goal, std::string_view action) {
    const json* next = peek(goal);
    auto& i = cursor_[goal];
    if (!next)
        throw Error(ErrorCode::ScriptExhausted,
                    "no " + std::string(action) + " record left for goal '" + goal + "' at step " + std::to_string(i));
    if (next->at("action") != action)
        throw Error(ErrorCode::ScriptMismatch, "expected a " + std::string(action) + " record for goal '" + goal +
                                                   "' at step " + std::to_string(i) + ", found " +
                                                   next->at("action").get<std::string>());
    ++i;
    return *next;
}

std::size_t ScriptedPolicy::remaining(const std::string& goal) const {
    auto it = by_goal_.find(goal);
    if (it == by_goal_.end()) return 0;
    auto c = cursor_.find(goal);
    return it->second.size() - (c == cursor_.end() ? 0 : c->second);
}

ToolCall ScriptedPolicy::decide_team_action(const TeamContext& ctx) {
    const json* next = peek(ctx.task);
    if (next && next->at("action") == "launch") {
        const auto& r = take(ctx.task, "launch");
        LaunchCall call;
        if (r.contains("members")) call.team_members = strings(r, "members");
        return call;
    }
    const auto& r = take(ctx.task, "search");
    return SearchCall{strings(r, "characteristics")};
}

UtteranceDecision ScriptedPolicy::decide_utterance(const ConversationView& view) {
    const auto& r = take(view.goal, "utter");
    UtteranceDecision d;
    d.kind = *message_kind_from_string(r.at("kind").get<std::string>());
    d.content = r.value("content", std::string{});
    d.next_speakers = strings(r, "next_speakers");
    if (r.contains("triggers")) d.triggers = strings(r, "triggers");
    if (d.kind == MessageKind::conclusion) stashed_conclusion_[view.comm_id] = d.content;
    return d;
}

TaskSummary ScriptedPolicy::summarize_task(const ConversationView& view, const AgentMessage& assignment) {
    const json* next = peek(view.goal);
    if (next && next->at("action") == "summarize") {
        const auto& r = take(view.goal, "summarize");
        return {r.at("task_desc").get<std::string>(), r.value("delegate", false)};
    }
    const auto& p = assignment.payload;
    return {p.task_desc.value_or(p.content.value_or("")), false};
}

std::string ScriptedPolicy::conclude(const ConversationView& view) {
    const json* next = peek(view.goal);
    if (next && next->at("action") == "conclude") return take(view.goal, "conclude").at("content").get<std::string>();
    auto it = stashed_conclusion_.find(view.comm_id);
    if (it != stashed_conclusion_.end() && !it->second.empty()) return it->second;
    for (auto m = view.transcript.rbegin(); m != view.transcript.rend(); ++m) {
        if (m->payload.kind == MessageKind::task_result && m->payload.task_conclusion) return *m->payload.task_conclusion;
    }
    return std::string(kNoResult);
}

std::string ScriptedPolicy::evaluate_contact(const ConversationView&, const std::string&) {
    return std::string(kContactNote);
}

} // namespace agentnet
