#pragma once

// The capability behind a client, reached only through run/read_memory.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace agentnet {

struct MemoryRecord {
    enum class Kind { note, completion, failure };
    Kind kind = Kind::note;
    std::string text;

    bool operator==(const MemoryRecord&) const = default;
};

class IntegratedAgent {
public:
    virtual ~IntegratedAgent() = default;

    /// Starts work and returns at once with a fresh task id.
    virtual std::string run(const std::string& task_desc) = 0;

    /// History of a task so far; the task is done once the last record is a
    /// completion or failure. Throws Error(NotFound) for unknown ids.
    virtual std::vector<MemoryRecord> read_memory(const std::string& task_id) = 0;
};

/// Wraps a synchronous function as an integrated agent: each run executes
/// `fn` on a worker thread (after `latency`) and records a single completion,
/// or a failure if `fn` throws.
class FunctionAgent : public IntegratedAgent {
public:
    using Fn = std::function<std::string(const std::string&)>;

    explicit FunctionAgent(Fn fn, std::chrono::milliseconds latency = std::chrono::milliseconds{0});
    ~FunctionAgent() override;

    std::string run(const std::string& task_desc) override;
    std::vector<MemoryRecord> read_memory(const std::string& task_id) override;

private:
    Fn fn_;
    std::chrono::milliseconds latency_;
    std::mutex mu_;
    std::map<std::string, std::vector<MemoryRecord>> memory_;
    std::vector<std::thread> workers_;
};

/// Always fails: run() throws Error(AgentFailure).
class FailAgent : public IntegratedAgent {
public:
    std::string run(const std::string& task_desc) override;
    std::vector<MemoryRecord> read_memory(const std::string& task_id) override;
};

/// Evaluates the integer expression starting at the first digit, '(' or '-'
/// of `text`. Supports + - * / (also − × ÷), parentheses and unary minus,
/// with the usual precedence. Division truncates toward zero.
/// Throws Error(AgentFailure) on syntax errors, division by zero or overflow.
std::int64_t evaluate_arithmetic(std::string_view text);

enum class AgentKind { echo, arith, fail, none };

AgentKind agent_kind_from_string(std::string_view name);

/// nullptr for AgentKind::none.
std::unique_ptr<IntegratedAgent> make_integrated_agent(AgentKind kind,
                                                       std::chrono::milliseconds latency = std::chrono::milliseconds{0});

} // namespace agentnet
