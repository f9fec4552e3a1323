#pragma once

// Scenario runner: one hub plus scripted clients, in-process or as separate
// processes over TCP, with metrics, transcript replay and golden comparison.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentnet/conversation_fsm.hpp"
#include "agentnet/integrated_agent.hpp"
#include "agentnet/net.hpp"
#include "agentnet/registry.hpp"
#include "agentnet/teaming.hpp"

namespace agentnet {

struct ScenarioAgent {
    AgentProfile profile;
    AgentKind integrated_agent = AgentKind::none;
    std::int64_t latency_ms = 0;
    nlohmann::json script = nlohmann::json::array();
    /// Decisions come from the HTTP adapter at $AGENTNET_POLICY_URL, with
    /// prompts from $AGENTNET_PROMPTS_DIR (default ./prompts).
    bool remote_policy = false;
};

struct ScenarioTask {
    std::string goal;
    std::string initiator;
    std::optional<std::int64_t> max_turns;
    std::int64_t max_depth = 2;
};

/// Either bound may be absent. A bare number in the scenario pins both.
struct MetricBound {
    std::optional<double> min;
    std::optional<double> max;
};

struct Expectations {
    std::optional<std::string> final_conclusion;
    std::optional<std::filesystem::path> transcript_golden; // resolved against the scenario file
    std::map<std::string, MetricBound> metric_bounds;
};

struct Scenario {
    std::string name;
    std::vector<ScenarioAgent> agents;
    ScenarioTask task;
    Expectations expectations;
    nlohmann::json raw; // the document it was read from
};

/// Throws Error(ScenarioInvalid).
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

struct Metrics {
    std::uint64_t conversation_turns = 0;
    std::uint64_t total_frames = 0;
    std::map<std::string, std::uint64_t> frames_per_kind;
    std::uint64_t edges_full_flat = 0;
    std::uint64_t edges_nested = 0;
    std::uint64_t sync_tasks = 0;
    std::uint64_t async_tasks = 0;
    std::uint64_t triggers_fired = 0;

    /// Named scalar metric; throws Error(ScenarioInvalid) for unknown names.
    double get(const std::string& name) const;
};

nlohmann::json to_json(const Metrics& m);

struct GroupTranscript {
    std::string comm_id;
    std::vector<std::string> lines; // encoded frames in seq order
};

struct RunReport {
    std::string scenario;
    std::vector<GroupTranscript> groups; // creation order
    std::vector<TeamTree> trees;
    Metrics metrics;
    std::optional<std::string> conclusion; // of the first group
    std::vector<std::string> violations;
    std::vector<std::string> expectation_failures;

    bool passed() const { return violations.empty() && expectation_failures.empty(); }
};

nlohmann::json to_json(const RunReport& r);

/// All group transcripts concatenated in creation order with UUIDs renamed.
std::string normalized_transcript(const RunReport& r);

Metrics compute_metrics(const std::vector<GroupTranscript>& groups, const std::vector<TeamTree>& trees);

struct RunOptions {
    bool processes = false;
    std::filesystem::path agent_binary; // the CLI, for processes mode
    std::filesystem::path data_dir;     // empty: run in memory only
    std::chrono::milliseconds deadline{120000};
    std::chrono::milliseconds stall_timeout{5000};
};

/// Plays the scenario to quiescence (or deadline / stall) and checks the
/// expectations. `golden_dir` overrides transcript_golden with
/// <golden_dir>/<name>.ndjson.
RunReport run_scenario(const Scenario& scenario, const RunOptions& options = {},
                       const std::optional<std::filesystem::path>& golden_dir = std::nullopt);

void check_expectations(const Scenario& scenario, RunReport& report,
                        const std::optional<std::filesystem::path>& golden_dir = std::nullopt);

struct ReplayResult {
    ChatMachine machine;
    std::uint64_t conversation_frames = 0;
    std::vector<std::string> violations; // "<Code>@<seq>"
};

/// Folds the state machine over one group's frames. Stops at the first
/// violation. A frame past the turn budget is reported as TraceBound.
/// Throws Error(MalformedLog) for a line that is not a valid frame.
ReplayResult replay_lines(const std::vector<std::string>& lines);
std::vector<std::string> replay_transcript(const std::filesystem::path& log);

/// Body of the `agent` subcommand run by processes mode: connects one
/// scenario agent to the server, plays until the server says the run is
/// over, then writes {"agent","violations","groups"} JSON to `out`.
int run_agent_process(const Scenario& scenario, const std::string& agent_name, const net::Address& server,
                      const std::string& auth_token, std::ostream& out);

} // namespace agentnet
