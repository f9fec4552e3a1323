#include "agentnet/integrated_agent.hpp"

#include <limits>
#include <optional>

#include "agentnet/error.hpp"
#include "agentnet/ids.hpp"

namespace agentnet {

FunctionAgent::FunctionAgent(Fn fn, std::chrono::milliseconds latency) : fn_(std::move(fn)), latency_(latency) {}

FunctionAgent::~FunctionAgent() {
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
}

std::string FunctionAgent::run(const std::string& task_desc) {
    auto id = make_uuid_v4();
    std::lock_guard lock(mu_);
    memory_[id].push_back({MemoryRecord::Kind::note, "started"});
    workers_.emplace_back([this, id, task_desc] {
        if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
        MemoryRecord done;
        try {
            done = {MemoryRecord::Kind::completion, fn_(task_desc)};
        } catch (const std::exception& e) {
            done = {MemoryRecord::Kind::failure, e.what()};
        }
        std::lock_guard inner(mu_);
        memory_[id].push_back(std::move(done));
    });
    return id;
}

std::vector<MemoryRecord> FunctionAgent::read_memory(const std::string& task_id) {
    std::lock_guard lock(mu_);
    auto it = memory_.find(task_id);
    if (it == memory_.end()) throw Error(ErrorCode::NotFound, "unknown task " + task_id);
    return it->second;
}

std::string FailAgent::run(const std::string&) { throw Error(ErrorCode::AgentFailure, "integrated agent failed"); }

std::vector<MemoryRecord> FailAgent::read_memory(const std::string& task_id) {
    throw Error(ErrorCode::NotFound, "unknown task " + task_id);
}

namespace {

[[noreturn]] void arith_error(const std::string& what) { throw Error(ErrorCode::AgentFailure, what); }

class ArithParser {
public:
    explicit ArithParser(std::string_view s) : s_(s) {}

    std::int64_t parse() { return expr(); }

private:
    enum class Op { add, sub, mul, div, lparen, rparen };

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    bool starts_with(std::string_view tok) const { return s_.substr(pos_).substr(0, tok.size()) == tok; }

    std::optional<std::pair<Op, std::size_t>> peek_op() {
        skip_ws();
        static const std::pair<std::string_view, Op> table[] = {
            {"+", Op::add}, {"-", Op::sub}, {"\xE2\x88\x92", Op::sub}, {"*", Op::mul}, {"\xC3\x97", Op::mul},
            {"/", Op::div}, {"\xC3\xB7", Op::div}, {"(", Op::lparen}, {")", Op::rparen},
        };
        for (const auto& [tok, op] : table) {
            if (starts_with(tok)) return std::pair{op, tok.size()};
        }
        return std::nullopt;
    }

    static std::int64_t checked(bool overflow, std::int64_t v) {
        if (overflow) arith_error("arithmetic overflow");
        return v;
    }

    std::int64_t expr() {
        auto v = term();
        while (auto op = peek_op()) {
            if (op->first != Op::add && op->first != Op::sub) break;
            pos_ += op->second;
            auto rhs = term();
            std::int64_t out = 0;
            bool of = op->first == Op::add ? __builtin_add_overflow(v, rhs, &out) : __builtin_sub_overflow(v, rhs, &out);
            v = checked(of, out);
        }
        return v;
    }

    std::int64_t term() {
        auto v = unary();
        while (auto op = peek_op()) {
            if (op->first != Op::mul && op->first != Op::div) break;
            pos_ += op->second;
            auto rhs = unary();
            if (op->first == Op::mul) {
                std::int64_t out = 0;
                bool of = __builtin_mul_overflow(v, rhs, &out);
                v = checked(of, out);
            } else {
                if (rhs == 0) arith_error("division by zero");
                if (v == std::numeric_limits<std::int64_t>::min() && rhs == -1) arith_error("arithmetic overflow");
                v /= rhs;
            }
        }
        return v;
    }

    std::int64_t unary() {
        auto op = peek_op();
        if (op && op->first == Op::sub) {
            pos_ += op->second;
            auto operand = unary();
            std::int64_t out = 0;
            bool of = __builtin_sub_overflow(std::int64_t{0}, operand, &out);
            return checked(of, out);
        }
        return primary();
    }

    std::int64_t primary() {
        auto op = peek_op();
        if (op && op->first == Op::lparen) {
            pos_ += op->second;
            auto v = expr();
            auto close = peek_op();
            if (!close || close->first != Op::rparen) arith_error("missing ')'");
            pos_ += close->second;
            return v;
        }
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] < '0' || s_[pos_] > '9') arith_error("expected a number");
        std::int64_t v = 0;
        while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') {
            bool of = __builtin_mul_overflow(v, 10, &v) || __builtin_add_overflow(v, s_[pos_] - '0', &v);
            if (of) arith_error("arithmetic overflow");
            ++pos_;
        }
        return v;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

} // namespace

std::int64_t evaluate_arithmetic(std::string_view text) {
    std::size_t start = text.size();
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if ((c >= '0' && c <= '9') || c == '(' || c == '-' || text.substr(i, 3) == "\xE2\x88\x92") {
            start = i;
            break;
        }
    }
    if (start == text.size()) arith_error("no arithmetic expression in '" + std::string(text) + "'");
    return ArithParser(text.substr(start)).parse();
}

AgentKind agent_kind_from_string(std::string_view name) {
    if (name == "echo") return AgentKind::echo;
    if (name == "arith") return AgentKind::arith;
    if (name == "fail") return AgentKind::fail;
    if (name == "none") return AgentKind::none;
    throw Error(ErrorCode::ScenarioInvalid, "unknown integrated agent '" + std::string(name) + "'");
}

std::unique_ptr<IntegratedAgent> make_integrated_agent(AgentKind kind, std::chrono::milliseconds latency) {
    switch (kind) {
    case AgentKind::echo: return std::make_unique<FunctionAgent>([](const std::string& d) { return d; }, latency);
    case AgentKind::arith:
        return std::make_unique<FunctionAgent>(
            [](const std::string& d) { return std::to_string(evaluate_arithmetic(d)); }, latency);
    case AgentKind::fail: return std::make_unique<FailAgent>();
    case AgentKind::none: return nullptr;
    }
    return nullptr;
}

} // namespace agentnet
