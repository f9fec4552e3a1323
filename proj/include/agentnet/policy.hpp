#pragma once

// Every decision a client has to make behind one interface: team actions,
// utterances (next state plus next speakers), task summaries, conclusions.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "agentnet/conversation_fsm.hpp"
#include "agentnet/protocol.hpp"
#include "agentnet/records.hpp"
#include "agentnet/registry.hpp"

namespace agentnet {

struct SearchCall {
    std::vector<std::string> characteristics;
};

/// Absent team_members means the caller works alone.
struct LaunchCall {
    std::optional<std::vector<std::string>> team_members;
};

using ToolCall = std::variant<SearchCall, LaunchCall>;

struct TeamContext {
    std::string self;
    std::string task;
    const std::vector<SearchHit>& search_results; // every hit so far, in call order
    const std::vector<ContactEntry>& contacts;
    int calls_so_far = 0;
};

/// What a policy sees of one group chat.
struct ConversationView {
    std::string self;
    std::string comm_id;
    std::string goal;
    ConversationState state = ConversationState::discussion;
    const std::vector<std::string>& members;
    const std::vector<AgentMessage>& transcript;
};

struct UtteranceDecision {
    std::string content;
    MessageKind kind = MessageKind::discussion;
    std::vector<std::string> next_speakers;
    std::optional<std::vector<std::string>> triggers;
};

struct TaskSummary {
    std::string task_desc;
    bool delegate = false; // hand the task to a spawned sub-group
};

class Policy {
public:
    virtual ~Policy() = default;

    virtual ToolCall decide_team_action(const TeamContext& ctx) = 0;
    virtual UtteranceDecision decide_utterance(const ConversationView& view) = 0;
    virtual TaskSummary summarize_task(const ConversationView& view, const AgentMessage& assignment) = 0;
    virtual std::string conclude(const ConversationView& view) = 0;
    virtual std::string evaluate_contact(const ConversationView& view, const std::string& teammate) = 0;
};

/// Deterministic policy reading decision records from a script.
///
/// A record is a JSON object {"goal": g, "action": a, ...} with action one of
///   search    {"characteristics": [..]}
///   launch    {"members": [..]}            (omit members for a solo group)
///   utter     {"kind": k, "content": s, "next_speakers": [..], "triggers": [..]}
///   summarize {"task_desc": s, "delegate": bool}
///   conclude  {"content": s}
/// Records are consumed in order per goal. Team and utterance decisions are
/// strict: the next record for the goal must have the matching action.
/// Summaries and conclusions take a matching record when it is next and fall
/// back otherwise.
class ScriptedPolicy : public Policy {
public:
    /// Throws Error(ScenarioInvalid) on malformed records.
    explicit ScriptedPolicy(const nlohmann::json& script);

    ToolCall decide_team_action(const TeamContext& ctx) override;
    UtteranceDecision decide_utterance(const ConversationView& view) override;
    TaskSummary summarize_task(const ConversationView& view, const AgentMessage& assignment) override;
    std::string conclude(const ConversationView& view) override;
    std::string evaluate_contact(const ConversationView& view, const std::string& teammate) override;

    static constexpr std::string_view kContactNote = "collaborated";
    static constexpr std::string_view kNoResult = "NO RESULT";

    /// Records not yet consumed, per goal.
    std::size_t remaining(const std::string& goal) const;

private:
    const nlohmann::json* peek(const std::string& goal) const;
    const nlohmann::json& take(const std::string& goal, std::string_view action);

    std::map<std::string, std::vector<nlohmann::json>> by_goal_;
    std::map<std::string, std::size_t> cursor_;
    std::map<std::string, std::string> stashed_conclusion_; // by comm_id
};

/// Validates one script record; throws Error(ScenarioInvalid).
void validate_script_record(const nlohmann::json& record);

} // namespace agentnet
