// Operator CLI: serve, run-scenario, search, replay.

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "agentnet/error.hpp"
#include "agentnet/harness.hpp"
#include "agentnet/link.hpp"
#include "agentnet/server.hpp"
#include "agentnet/tcp_server.hpp"

namespace {

using namespace agentnet;

constexpr int kExitPass = 0;
constexpr int kExitExpectation = 1;
constexpr int kExitInvalidInput = 2;
constexpr int kExitRuntime = 3;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

int exit_code_for(const Error& e) {
    switch (e.code()) {
    case ErrorCode::ScenarioInvalid:
    case ErrorCode::InvalidQuery:
    case ErrorCode::MalformedLog:
    case ErrorCode::ValidationFailed:
    case ErrorCode::SchemaViolation:
    case ErrorCode::MalformedFrame: return kExitInvalidInput;
    case ErrorCode::ExpectationFailed: return kExitExpectation;
    default: return kExitRuntime;
    }
}

int serve(const std::string& config_path, const std::string& listen, const std::string& token, std::int64_t max_depth,
          std::int64_t max_turns, const std::string& data_dir) {
    ServerConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw Error(ErrorCode::Io, "cannot read " + config_path);
        cfg = server_config_from_json(nlohmann::json::parse(in), cfg);
    }
    if (!listen.empty()) cfg.listen = listen;
    if (!token.empty()) cfg.auth_token = token;
    if (max_depth >= 0) cfg.max_team_up_depth = max_depth;
    if (max_turns > 0) cfg.default_max_turns = max_turns;
    if (!data_dir.empty()) cfg.data_dir = data_dir;

    std::shared_ptr<Registry> registry;
    if (!cfg.data_dir.empty()) registry = std::make_shared<Registry>(cfg.data_dir / "registry.ndjson");
    Hub hub(cfg, registry);
    TcpFrontend frontend(hub, net::parse_address(cfg.listen));
    frontend.start();
    std::cout << "listening on " << net::to_string(frontend.address()) << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    frontend.stop();
    return kExitPass;
}

int run(const std::string& file, const std::string& golden, const std::string& report_path, bool processes,
        const std::string& write_golden, const std::string& data_dir) {
    auto scenario = load_scenario(file);
    RunOptions opts;
    opts.processes = processes;
    opts.agent_binary = std::filesystem::read_symlink("/proc/self/exe");
    opts.data_dir = data_dir;
    std::optional<std::filesystem::path> golden_dir;
    if (!golden.empty()) golden_dir = golden;
    auto report = run_scenario(scenario, opts, golden_dir);

    if (!write_golden.empty()) {
        std::filesystem::create_directories(write_golden);
        std::ofstream out(std::filesystem::path(write_golden) / (scenario.name + ".ndjson"), std::ios::binary);
        out << normalized_transcript(report);
    }
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        out << to_json(report).dump(2) << "\n";
    }

    std::cout << "scenario " << scenario.name << ": " << (report.passed() ? "passed" : "FAILED") << "\n";
    std::cout << "conclusion: " << report.conclusion.value_or("(none)") << "\n";
    std::cout << "metrics: " << to_json(report.metrics).dump() << "\n";
    for (const auto& v : report.violations) std::cout << "violation: " << v << "\n";
    for (const auto& f : report.expectation_failures) std::cout << "expectation failed: " << f << "\n";
    return report.passed() ? kExitPass : kExitExpectation;
}

int search(const std::string& server, const std::vector<std::string>& query, const std::string& token,
           std::size_t limit) {
    TcpLink link(net::parse_address(server), "", token, std::nullopt, nullptr);
    auto hits = link.search(SearchQuery{query, limit});
    for (const auto& h : hits) {
        std::cout << h.profile.agent_name << "\t" << h.score << "\t" << h.profile.agent_type << "\t"
                  << h.profile.agent_description << "\n";
    }
    link.close();
    return kExitPass;
}

int replay(const std::string& log) {
    auto violations = replay_transcript(log);
    for (const auto& v : violations) std::cout << v << "\n";
    if (violations.empty()) std::cout << "ok\n";
    return violations.empty() ? kExitPass : kExitExpectation;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentnet: agent registry, group chat routing and scenario runner"};
    app.require_subcommand(1);

    std::string config_path, listen, token, data_dir;
    std::int64_t max_depth = -1, max_turns = 0;
    auto* serve_cmd = app.add_subcommand("serve", "Run a standalone server");
    serve_cmd->add_option("--config", config_path, "JSON config file");
    serve_cmd->add_option("--listen", listen, "host:port to listen on");
    serve_cmd->add_option("--token", token, "Shared auth token");
    serve_cmd->add_option("--max-depth", max_depth, "Maximum team_up_depth");
    serve_cmd->add_option("--max-turns", max_turns, "Default turn budget");
    serve_cmd->add_option("--data-dir", data_dir, "Directory for the registry log and transcripts");

    std::string scenario_file, golden, report_path, write_golden, run_data_dir;
    bool processes = false;
    auto* run_cmd = app.add_subcommand("run-scenario", "Play a scenario file end to end");
    run_cmd->add_option("file", scenario_file, "Scenario JSON")->required();
    run_cmd->add_option("--golden", golden, "Directory of golden transcripts (<name>.ndjson)");
    run_cmd->add_option("--report", report_path, "Write the run report JSON here");
    run_cmd->add_flag("--processes", processes, "Run every agent as its own process over TCP");
    run_cmd->add_option("--write-golden", write_golden, "Write the normalized transcript into this directory");
    run_cmd->add_option("--data-dir", run_data_dir, "Persist server and client logs here");

    std::string server = "127.0.0.1:7420", search_token = "agentnet";
    std::vector<std::string> query;
    std::size_t limit = 10;
    auto* search_cmd = app.add_subcommand("search", "Query a running server's registry");
    search_cmd->add_option("--server", server, "host:port");
    search_cmd->add_option("--query", query, "Desired characteristics")->required();
    search_cmd->add_option("--token", search_token, "Shared auth token");
    search_cmd->add_option("--limit", limit, "Maximum hits");

    std::string log;
    auto* replay_cmd = app.add_subcommand("replay", "Check a group transcript log");
    replay_cmd->add_option("log", log, "NDJSON transcript")->required();

    std::string agent_server, agent_scenario, agent_name, agent_token = "agentnet";
    auto* agent_cmd = app.add_subcommand("agent", "Run one scenario agent (used by --processes)");
    agent_cmd->group("");
    agent_cmd->add_option("--server", agent_server)->required();
    agent_cmd->add_option("--scenario", agent_scenario)->required();
    agent_cmd->add_option("--name", agent_name)->required();
    agent_cmd->add_option("--token", agent_token);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitPass : kExitInvalidInput;
    }

    try {
        if (*serve_cmd) return serve(config_path, listen, token, max_depth, max_turns, data_dir);
        if (*run_cmd) return run(scenario_file, golden, report_path, processes, write_golden, run_data_dir);
        if (*search_cmd) return search(server, query, search_token, limit);
        if (*replay_cmd) return replay(log);
        if (*agent_cmd) {
            auto scenario = load_scenario(agent_scenario);
            return run_agent_process(scenario, agent_name, net::parse_address(agent_server), agent_token, std::cout);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.detail() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitInvalidInput;
}
