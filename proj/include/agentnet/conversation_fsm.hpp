#pragma once

// Group-chat state machine: legal transitions, sequential speaking,
// turn budget and sync/async/trigger task bookkeeping.
//
// The same machine runs on the server (authoritative), in every client
// (local mirror used to decide when to speak) and in transcript replay.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agentnet/error.hpp"
#include "agentnet/protocol.hpp"

namespace agentnet {

enum class ConversationState { discussion, sync_assignment, async_assignment, pause_trigger, conclusion };

std::string_view to_string(ConversationState state);

enum class CompletionEvent { all_sync_tasks_complete, all_triggers_complete };

using FsmInput = std::variant<MessageKind, CompletionEvent>;

/// Transition function. Throws Error(IllegalTransition) for any pair
/// outside the table; plumbing kinds are not inputs and always throw.
ConversationState allowed(ConversationState state, FsmInput input);

class ChatMachine {
public:
    explicit ChatMachine(std::int64_t max_turns = 20) : max_turns_(max_turns) {}

    ConversationState state() const { return state_; }
    std::int64_t turn_count() const { return turn_count_; }
    std::int64_t max_turns() const { return max_turns_; }

    const std::vector<std::string>& members() const { return members_; }
    const std::string& initiator() const { return initiator_; }
    bool is_member(std::string_view name) const;

    /// Agents allowed to send the next conversation frame.
    const std::set<std::string>& expected_speakers() const { return floor_; }

    /// task id -> assignee
    const std::map<std::string, std::string>& open_sync_tasks() const { return open_sync_; }
    const std::map<std::string, std::string>& open_async_tasks() const { return open_async_; }
    const std::set<std::string>& open_triggers() const { return open_triggers_; }
    const std::set<std::string>& known_async_tasks() const { return known_async_; }

    /// True when the last advance handed the floor to expected_speakers().
    bool granted() const { return granted_; }

    /// Turn budget spent and the conclusion-demand notice not yet seen.
    bool awaiting_forced_notice() const {
        return state_ == ConversationState::discussion && turn_count_ >= max_turns_ && !forced_notice_seen_;
    }

    /// Conclusion has been demanded; only a conclusion frame is acceptable.
    bool forced() const { return forced_notice_seen_ && state_ == ConversationState::discussion; }

    friend ChatMachine advance(ChatMachine machine, const AgentMessage& msg);
    friend std::optional<Error> check_advance(const ChatMachine& machine, const AgentMessage& msg);

private:
    std::optional<Error> check(const AgentMessage& msg) const;
    void apply_notice(const AgentMessage& msg);
    void apply_conversation(const AgentMessage& msg);
    void apply_task_result(const AgentMessage& msg);
    void release(CompletionEvent event);

    ConversationState state_ = ConversationState::discussion;
    std::int64_t turn_count_ = 0;
    std::int64_t max_turns_;
    std::vector<std::string> members_;
    std::string initiator_;
    std::set<std::string> floor_;
    std::string resume_speaker_;
    std::map<std::string, std::string> open_sync_;
    std::map<std::string, std::string> open_async_;
    std::set<std::string> open_triggers_;
    std::set<std::string> known_async_;
    std::set<std::string> completed_;
    bool granted_ = false;
    bool forced_notice_seen_ = false;
};

/// Applies one frame. Throws Error with one of NotMember, GroupConcluded,
/// IllegalTransition, NotYourTurn, TurnBudgetExhausted.
ChatMachine advance(ChatMachine machine, const AgentMessage& msg);

/// The error advance would throw for `msg`, or nullopt when it is legal.
std::optional<Error> check_advance(const ChatMachine& machine, const AgentMessage& msg);

/// Concluded and owing no task results.
bool is_quiescent(const ChatMachine& machine);

} // namespace agentnet
