#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agentnet {

enum class ErrorCode {
    // protocol
    ValidationFailed,
    MalformedFrame,
    SchemaViolation,
    // registry
    DuplicateName,
    NotFound,
    InvalidProfile,
    InvalidQuery,
    // sessions
    AuthFailed,
    UnknownAgent,
    AlreadyConnected,
    NotConnected,
    SenderMismatch,
    // groups and routing
    UnknownMember,
    DepthExceeded,
    InvalidParentTask,
    UnknownGroup,
    NotMember,
    NotYourTurn,
    IllegalTransition,
    GroupConcluded,
    TurnBudgetExhausted,
    // client runtime
    StaleSeq,
    PolicyFailure,
    AgentFailure,
    Timeout,
    ServerUnreachable,
    LaunchRejected,
    // policy
    ScriptExhausted,
    ScriptMismatch,
    IllegalDecision,
    AdapterUnreachable,
    // harness
    ScenarioInvalid,
    Deadline,
    ExpectationFailed,
    MalformedLog,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Parses a name produced by to_string; unknown names map to Io.
ErrorCode error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace agentnet
