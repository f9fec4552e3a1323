#include "agentnet/error.hpp"

#include <array>
#include <utility>

namespace agentnet {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 36> kNames{{
    {ErrorCode::ValidationFailed, "ValidationFailed"},
    {ErrorCode::MalformedFrame, "MalformedFrame"},
    {ErrorCode::SchemaViolation, "SchemaViolation"},
    {ErrorCode::DuplicateName, "DuplicateName"},
    {ErrorCode::NotFound, "NotFound"},
    {ErrorCode::InvalidProfile, "InvalidProfile"},
    {ErrorCode::InvalidQuery, "InvalidQuery"},
    {ErrorCode::AuthFailed, "AuthFailed"},
    {ErrorCode::UnknownAgent, "UnknownAgent"},
    {ErrorCode::AlreadyConnected, "AlreadyConnected"},
    {ErrorCode::NotConnected, "NotConnected"},
    {ErrorCode::SenderMismatch, "SenderMismatch"},
    {ErrorCode::UnknownMember, "UnknownMember"},
    {ErrorCode::DepthExceeded, "DepthExceeded"},
    {ErrorCode::InvalidParentTask, "InvalidParentTask"},
    {ErrorCode::UnknownGroup, "UnknownGroup"},
    {ErrorCode::NotMember, "NotMember"},
    {ErrorCode::NotYourTurn, "NotYourTurn"},
    {ErrorCode::IllegalTransition, "IllegalTransition"},
    {ErrorCode::GroupConcluded, "GroupConcluded"},
    {ErrorCode::TurnBudgetExhausted, "TurnBudgetExhausted"},
    {ErrorCode::StaleSeq, "StaleSeq"},
    {ErrorCode::PolicyFailure, "PolicyFailure"},
    {ErrorCode::AgentFailure, "AgentFailure"},
    {ErrorCode::Timeout, "Timeout"},
    {ErrorCode::ServerUnreachable, "ServerUnreachable"},
    {ErrorCode::LaunchRejected, "LaunchRejected"},
    {ErrorCode::ScriptExhausted, "ScriptExhausted"},
    {ErrorCode::ScriptMismatch, "ScriptMismatch"},
    {ErrorCode::IllegalDecision, "IllegalDecision"},
    {ErrorCode::AdapterUnreachable, "AdapterUnreachable"},
    {ErrorCode::ScenarioInvalid, "ScenarioInvalid"},
    {ErrorCode::Deadline, "Deadline"},
    {ErrorCode::ExpectationFailed, "ExpectationFailed"},
    {ErrorCode::MalformedLog, "MalformedLog"},
    {ErrorCode::Io, "Io"},
}};

} // namespace

std::string_view to_string(ErrorCode code) {
    for (const auto& [c, name] : kNames) {
        if (c == code) return name;
    }
    return "Io";
}

ErrorCode error_code_from_string(std::string_view name) {
    for (const auto& [c, n] : kNames) {
        if (n == name) return c;
    }
    return ErrorCode::Io;
}

} // namespace agentnet
