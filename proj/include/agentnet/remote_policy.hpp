#pragma once

// Policy backed by a text-generation service behind one HTTP JSON endpoint.
//
// Request:  POST <url> {"system_prompt": s, "messages": [{"role","content"}..], "expected_schema": {..}}
// Response: a JSON object matching expected_schema.

#include <filesystem>
#include <map>
#include <string>

#include "agentnet/policy.hpp"

namespace agentnet {

class RemotePolicy : public Policy {
public:
    /// `url` like "http://127.0.0.1:8080/decide". `prompts_dir` holds
    /// team.txt, utterance.txt, summarize.txt and conclude.txt.
    RemotePolicy(std::string url, const std::filesystem::path& prompts_dir);

    ToolCall decide_team_action(const TeamContext& ctx) override;
    UtteranceDecision decide_utterance(const ConversationView& view) override;
    TaskSummary summarize_task(const ConversationView& view, const AgentMessage& assignment) override;
    std::string conclude(const ConversationView& view) override;
    std::string evaluate_contact(const ConversationView& view, const std::string& teammate) override;

private:
    /// Throws Error(AdapterUnreachable) on transport failure and
    /// Error(PolicyFailure) on a malformed answer.
    nlohmann::json ask(const std::string& prompt_name, const nlohmann::json& messages, const nlohmann::json& schema);

    std::string scheme_host_port_;
    std::string path_;
    std::map<std::string, std::string> prompts_;
};

} // namespace agentnet
