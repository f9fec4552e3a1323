#include "agentnet/remote_policy.hpp"

#include <fstream>
#include <sstream>

#include "httplib.h"

#include "agentnet/error.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

json transcript_messages(const ConversationView& view) {
    json msgs = json::array();
    msgs.push_back({{"role", "user"},
                    {"content", "You are " + view.self + ". Group goal: " + view.goal +
                                    ". Current state: " + std::string(to_string(view.state)) + "."}});
    for (const auto& m : view.transcript) {
        msgs.push_back({{"role", m.header.sender == view.self ? "assistant" : "user"},
                        {"content", encode_message(m)}});
    }
    return msgs;
}

const json kUtteranceSchema = {
    {"type", "object"},
    {"required", {"content", "kind", "next_speakers"}},
    {"properties",
     {{"content", {{"type", "string"}}},
      {"kind",
       {{"enum", {"discussion", "sync_task_assignment", "async_task_assignment", "pause_and_trigger", "conclusion"}}}},
      {"next_speakers", {{"type", "array"}, {"items", {{"type", "string"}}}}},
      {"triggers", {{"type", "array"}, {"items", {{"type", "string"}}}}}}}};

const json kTeamSchema = {
    {"type", "object"},
    {"required", {"tool"}},
    {"properties",
     {{"tool", {{"enum", {"search", "launch"}}}},
      {"characteristics", {{"type", "array"}, {"items", {{"type", "string"}}}}},
      {"team_members", {{"type", {"array", "null"}}, {"items", {{"type", "string"}}}}}}}};

const json kSummarySchema = {{"type", "object"},
                             {"required", {"task_desc"}},
                             {"properties", {{"task_desc", {{"type", "string"}}}, {"delegate", {{"type", "boolean"}}}}}};

const json kTextSchema = {
    {"type", "object"}, {"required", {"content"}}, {"properties", {{"content", {{"type", "string"}}}}}};

std::string text_field(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) throw Error(ErrorCode::PolicyFailure, std::string("answer lacks '") + key + "'");
    return j.at(key).get<std::string>();
}

std::vector<std::string> list_field(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    const auto& v = j.at(key);
    if (!v.is_array()) throw Error(ErrorCode::PolicyFailure, std::string("'") + key + "' must be a list");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw Error(ErrorCode::PolicyFailure, std::string("'") + key + "' entries must be strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

} // namespace

RemotePolicy::RemotePolicy(std::string url, const std::filesystem::path& prompts_dir) {
    auto scheme = url.find("://");
    auto path_at = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    scheme_host_port_ = url.substr(0, path_at);
    path_ = path_at == std::string::npos ? "/" : url.substr(path_at);
    for (const char* name : {"team", "utterance", "summarize", "conclude"}) {
        std::ifstream in(prompts_dir / (std::string(name) + ".txt"));
        if (!in) throw Error(ErrorCode::Io, "missing prompt file " + (prompts_dir / (std::string(name) + ".txt")).string());
        std::stringstream ss;
        ss << in.rdbuf();
        prompts_[name] = ss.str();
    }
}

json RemotePolicy::ask(const std::string& prompt_name, const json& messages, const json& schema) {
    httplib::Client cli(scheme_host_port_);
    cli.set_connection_timeout(5);
    cli.set_read_timeout(120);
    json body = {{"system_prompt", prompts_.at(prompt_name)}, {"messages", messages}, {"expected_schema", schema}};
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::AdapterUnreachable, httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::PolicyFailure, "adapter answered HTTP " + std::to_string(res->status));
    try {
        auto j = json::parse(res->body);
        if (!j.is_object()) throw Error(ErrorCode::PolicyFailure, "adapter answer is not an object");
        return j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::PolicyFailure, e.what());
    }
}

ToolCall RemotePolicy::decide_team_action(const TeamContext& ctx) {
    json hits = json::array();
    for (const auto& h : ctx.search_results) hits.push_back({{"profile", to_json(h.profile)}, {"score", h.score}});
    json contacts = json::array();
    for (const auto& c : ctx.contacts) contacts.push_back(to_json(c));
    json msgs = json::array({{{"role", "user"},
                              {"content", json{{"self", ctx.self},
                                               {"task", ctx.task},
                                               {"search_results", hits},
                                               {"contacts", contacts},
                                               {"calls_so_far", ctx.calls_so_far}}
                                              .dump()}}});
    auto a = ask("team", msgs, kTeamSchema);
    auto tool = text_field(a, "tool");
    if (tool == "search") {
        auto c = list_field(a, "characteristics");
        if (c.empty()) throw Error(ErrorCode::PolicyFailure, "search without characteristics");
        return SearchCall{c};
    }
    if (tool == "launch") {
        LaunchCall call;
        if (a.contains("team_members") && !a.at("team_members").is_null())
            call.team_members = list_field(a, "team_members");
        return call;
    }
    throw Error(ErrorCode::PolicyFailure, "unknown tool '" + tool + "'");
}

UtteranceDecision RemotePolicy::decide_utterance(const ConversationView& view) {
    auto a = ask("utterance", transcript_messages(view), kUtteranceSchema);
    UtteranceDecision d;
    d.content = text_field(a, "content");
    auto kind = message_kind_from_string(text_field(a, "kind"));
    if (!kind || !is_conversation_kind(*kind)) throw Error(ErrorCode::PolicyFailure, "answer kind is not a conversation kind");
    d.kind = *kind;
    d.next_speakers = list_field(a, "next_speakers");
    if (a.contains("triggers")) d.triggers = list_field(a, "triggers");
    return d;
}

TaskSummary RemotePolicy::summarize_task(const ConversationView& view, const AgentMessage& assignment) {
    auto msgs = transcript_messages(view);
    msgs.push_back({{"role", "user"}, {"content", "Summarize the task assigned to you in: " + encode_message(assignment)}});
    auto a = ask("summarize", msgs, kSummarySchema);
    if (a.contains("delegate") && !a.at("delegate").is_boolean())
        throw Error(ErrorCode::PolicyFailure, "'delegate' must be a bool");
    return {text_field(a, "task_desc"), a.value("delegate", false)};
}

std::string RemotePolicy::conclude(const ConversationView& view) {
    return text_field(ask("conclude", transcript_messages(view), kTextSchema), "content");
}

std::string RemotePolicy::evaluate_contact(const ConversationView& view, const std::string& teammate) {
    auto msgs = transcript_messages(view);
    msgs.push_back({{"role", "user"}, {"content", "Write a one-line note on working with " + teammate + "."}});
    return text_field(ask("conclude", msgs, kTextSchema), "content");
}

} // namespace agentnet
