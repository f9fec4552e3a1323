#include "agentnet/conversation_fsm.hpp"

#include <algorithm>

#include "agentnet/error.hpp"

namespace agentnet {

namespace {

using S = ConversationState;

Error illegal(const std::string& what) { return Error(ErrorCode::IllegalTransition, what); }

std::string describe(const FsmInput& input) {
    if (const auto* k = std::get_if<MessageKind>(&input)) return std::string(to_string(*k));
    return std::get<CompletionEvent>(input) == CompletionEvent::all_sync_tasks_complete ? "all_sync_tasks_complete"
                                                                                          : "all_triggers_complete";
}

std::optional<ConversationState> transition(ConversationState state, FsmInput input) {
    if (const auto* kind = std::get_if<MessageKind>(&input)) {
        if (state == S::discussion) {
            switch (*kind) {
            case MessageKind::discussion: return S::discussion;
            case MessageKind::sync_task_assignment: return S::sync_assignment;
            // The assignment is recorded; the chat itself keeps going.
            case MessageKind::async_task_assignment: return S::discussion;
            case MessageKind::pause_and_trigger: return S::pause_trigger;
            case MessageKind::conclusion: return S::conclusion;
            default: break;
            }
        }
    } else {
        auto event = std::get<CompletionEvent>(input);
        if (state == S::sync_assignment && event == CompletionEvent::all_sync_tasks_complete) return S::discussion;
        if (state == S::pause_trigger && event == CompletionEvent::all_triggers_complete) return S::discussion;
    }
    return std::nullopt;
}

} // namespace

std::string_view to_string(ConversationState state) {
    switch (state) {
    case ConversationState::discussion: return "discussion";
    case ConversationState::sync_assignment: return "sync_assignment";
    case ConversationState::async_assignment: return "async_assignment";
    case ConversationState::pause_trigger: return "pause_trigger";
    case ConversationState::conclusion: return "conclusion";
    }
    return "discussion";
}

ConversationState allowed(ConversationState state, FsmInput input) {
    if (auto next = transition(state, input)) return *next;
    throw illegal(describe(input) + " is not allowed in state " + std::string(to_string(state)));
}

bool ChatMachine::is_member(std::string_view name) const {
    return std::find(members_.begin(), members_.end(), name) != members_.end();
}

void ChatMachine::release(CompletionEvent event) {
    state_ = allowed(state_, event);
    floor_ = {resume_speaker_};
    granted_ = !awaiting_forced_notice();
}

std::optional<Error> ChatMachine::check(const AgentMessage& msg) const {
    const auto& sender = msg.header.sender;
    const auto& p = msg.payload;

    if (p.kind == MessageKind::system_notice) {
        if (sender != kServerSender) return illegal("system_notice may only come from the server");
        if (state_ == S::conclusion) return Error(ErrorCode::GroupConcluded, "group already concluded");
        const auto* members = &members_;
        if (members_.empty()) {
            if (!p.team_members || p.team_members->empty()) return illegal("first frame must announce the membership");
            members = &*p.team_members;
        }
        if (p.next_speaker.empty()) return std::nullopt;
        if (state_ != S::discussion) return illegal("floor can only be handed over during discussion");
        for (const auto& n : p.next_speaker) {
            if (std::find(members->begin(), members->end(), n) == members->end())
                return illegal("next speaker '" + n + "' is not a member");
        }
        return std::nullopt;
    }

    if (!is_member(sender)) return Error(ErrorCode::NotMember, sender + " is not a member of the group");

    if (p.kind == MessageKind::task_result) {
        const auto& id = *p.task_id;
        auto it = open_sync_.find(id);
        if (it == open_sync_.end()) {
            it = open_async_.find(id);
            if (it == open_async_.end()) return illegal("task '" + id + "' is not open in this group");
        }
        if (it->second != sender) return illegal("task '" + id + "' belongs to " + it->second + ", not " + sender);
        return std::nullopt;
    }

    if (state_ == S::conclusion) return Error(ErrorCode::GroupConcluded, "group already concluded");
    if (!transition(state_, p.kind))
        return illegal(std::string(to_string(p.kind)) + " is not allowed in state " + std::string(to_string(state_)));
    if (!floor_.count(sender)) return Error(ErrorCode::NotYourTurn, sender + " is not an expected speaker");
    if (turn_count_ >= max_turns_ && p.kind != MessageKind::conclusion)
        return Error(ErrorCode::TurnBudgetExhausted, "turn budget spent; only conclusion is accepted");
    for (const auto& n : p.next_speaker) {
        if (!is_member(n)) return illegal("next speaker '" + n + "' is not a member");
    }
    if (is_assignment_kind(p.kind)) {
        for (const auto& a : p.next_speaker) {
            auto id = assignee_task_id(*p.task_id, a);
            if (open_sync_.count(id) || known_async_.count(id) || completed_.count(id))
                return illegal("task id '" + id + "' already used");
        }
    }
    if (p.kind == MessageKind::pause_and_trigger) {
        for (const auto& t : *p.triggers) {
            if (!known_async_.count(t)) return illegal("trigger '" + t + "' is not an async task of this group");
        }
    }
    return std::nullopt;
}

// The apply_* functions assume check() accepted the frame.

void ChatMachine::apply_notice(const AgentMessage& msg) {
    const auto& p = msg.payload;
    if (members_.empty()) {
        members_ = *p.team_members;
        if (p.max_turns) max_turns_ = *p.max_turns;
        if (!p.next_speaker.empty()) initiator_ = p.next_speaker.front();
    }
    if (p.next_speaker.empty()) return;
    if (turn_count_ >= max_turns_) forced_notice_seen_ = true;
    floor_ = {p.next_speaker.begin(), p.next_speaker.end()};
    granted_ = true;
}

void ChatMachine::apply_conversation(const AgentMessage& msg) {
    const auto& sender = msg.header.sender;
    const auto& p = msg.payload;

    switch (p.kind) {
    case MessageKind::discussion:
        floor_ = p.next_speaker.empty() ? std::set<std::string>{sender}
                                        : std::set<std::string>{p.next_speaker.begin(), p.next_speaker.end()};
        break;
    case MessageKind::sync_task_assignment:
    case MessageKind::async_task_assignment: {
        const bool sync = p.kind == MessageKind::sync_task_assignment;
        for (const auto& a : p.next_speaker) {
            auto id = assignee_task_id(*p.task_id, a);
            if (sync) {
                open_sync_.emplace(id, a);
            } else {
                open_async_.emplace(id, a);
                known_async_.insert(id);
            }
        }
        resume_speaker_ = sender;
        floor_ = sync ? std::set<std::string>{} : std::set<std::string>{sender};
        break;
    }
    case MessageKind::pause_and_trigger: {
        std::set<std::string> waiting;
        for (const auto& t : *p.triggers) {
            if (open_async_.count(t)) waiting.insert(t);
        }
        open_triggers_ = std::move(waiting);
        resume_speaker_ = sender;
        floor_.clear();
        break;
    }
    case MessageKind::conclusion:
        floor_.clear();
        break;
    default:
        break;
    }

    state_ = *transition(state_, p.kind);
    ++turn_count_;
    if (state_ == S::pause_trigger && open_triggers_.empty()) {
        release(CompletionEvent::all_triggers_complete);
        return;
    }
    granted_ = state_ == S::discussion && !awaiting_forced_notice();
}

void ChatMachine::apply_task_result(const AgentMessage& msg) {
    const auto& id = *msg.payload.task_id;
    if (!open_sync_.erase(id)) open_async_.erase(id);
    completed_.insert(id);
    open_triggers_.erase(id);

    if (state_ == S::sync_assignment && open_sync_.empty()) {
        release(CompletionEvent::all_sync_tasks_complete);
    } else if (state_ == S::pause_trigger && open_triggers_.empty()) {
        release(CompletionEvent::all_triggers_complete);
    }
}

std::optional<Error> check_advance(const ChatMachine& machine, const AgentMessage& msg) { return machine.check(msg); }

ChatMachine advance(ChatMachine machine, const AgentMessage& msg) {
    if (auto rejection = machine.check(msg)) throw *rejection;
    machine.granted_ = false;
    switch (msg.payload.kind) {
    case MessageKind::system_notice: machine.apply_notice(msg); break;
    case MessageKind::task_result: machine.apply_task_result(msg); break;
    default: machine.apply_conversation(msg); break;
    }
    return machine;
}

bool is_quiescent(const ChatMachine& machine) {
    return machine.state() == S::conclusion && machine.open_sync_tasks().empty() &&
           machine.open_async_tasks().empty() && machine.open_triggers().empty();
}

} // namespace agentnet
