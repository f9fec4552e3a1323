#include "agentnet/harness.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "agentnet/client.hpp"
#include "agentnet/error.hpp"
#include "agentnet/event_log.hpp"
#include "agentnet/ids.hpp"
#include "agentnet/link.hpp"
#include "agentnet/remote_policy.hpp"
#include "agentnet/server.hpp"
#include "agentnet/tcp_server.hpp"
#include "agentnet/wire.hpp"

extern char** environ;

namespace agentnet {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ScenarioInvalid, what); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) invalid(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) invalid("unknown key '" + k + "' in " + where);
    }
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::unique_ptr<Client> make_client(const Scenario& s, const ScenarioAgent& a, const std::filesystem::path& data_dir) {
    ClientConfig cfg;
    cfg.agent_name = a.profile.agent_name;
    if (!data_dir.empty()) cfg.data_dir = data_dir / "agents" / a.profile.agent_name;
    cfg.max_team_up_depth = s.task.max_depth;
    std::unique_ptr<Policy> policy;
    if (a.remote_policy) {
        const char* url = std::getenv("AGENTNET_POLICY_URL");
        if (!url || !*url) invalid(a.profile.agent_name + " uses the remote policy but AGENTNET_POLICY_URL is not set");
        const char* prompts = std::getenv("AGENTNET_PROMPTS_DIR");
        policy = std::make_unique<RemotePolicy>(url, prompts && *prompts ? prompts : "prompts");
    } else {
        policy = std::make_unique<ScriptedPolicy>(a.script);
    }
    return std::make_unique<Client>(cfg, std::move(policy),
                                    make_integrated_agent(a.integrated_agent, std::chrono::milliseconds(a.latency_ms)));
}

ServerConfig hub_config(const Scenario& s, const RunOptions& o) {
    ServerConfig cfg;
    cfg.max_team_up_depth = s.task.max_depth;
    if (s.task.max_turns) cfg.default_max_turns = *s.task.max_turns;
    cfg.data_dir = o.data_dir;
    return cfg;
}

/// Compares each member's copy of a group with the hub's transcript.
void check_convergence(const std::vector<GroupTranscript>& hub_groups, const std::vector<GroupRecord>& records,
                       const std::map<std::string, std::map<std::string, std::vector<std::string>>>& member_copies,
                       std::vector<std::string>& violations) {
    for (std::size_t i = 0; i < hub_groups.size(); ++i) {
        const auto& g = hub_groups[i];
        for (const auto& m : records[i].team_members) {
            auto agent = member_copies.find(m);
            const std::vector<std::string>* copy = nullptr;
            if (agent != member_copies.end()) {
                auto it = agent->second.find(g.comm_id);
                if (it != agent->second.end()) copy = &it->second;
            }
            if (!copy) {
                violations.push_back("Divergence@g" + std::to_string(i) + ": " + m + " never saw the group");
            } else if (*copy != g.lines) {
                violations.push_back("Divergence@g" + std::to_string(i) + ": " + m + " holds " +
                                     std::to_string(copy->size()) + " frames, server " + std::to_string(g.lines.size()));
            }
        }
        for (const auto& [agent, groups] : member_copies) {
            if (groups.count(g.comm_id) &&
                std::find(records[i].team_members.begin(), records[i].team_members.end(), agent) ==
                    records[i].team_members.end())
                violations.push_back("IsolationLeak@g" + std::to_string(i) + ": " + agent);
        }
    }
}

void finish_report(RunReport& report, const Hub& hub) {
    auto records = hub.groups();
    for (const auto& r : records) report.groups.push_back({r.comm_id, hub.transcript(r.comm_id)});
    report.trees = build_team_trees(records);
    report.metrics = compute_metrics(report.groups, report.trees);
    if (!report.groups.empty()) {
        for (const auto& line : report.groups.front().lines) {
            auto m = decode_message(line);
            if (m.payload.kind == MessageKind::conclusion) report.conclusion = m.payload.content;
        }
    }
    for (std::size_t i = 0; i < report.groups.size(); ++i) {
        for (const auto& v : replay_lines(report.groups[i].lines).violations)
            report.violations.push_back("g" + std::to_string(i) + ":" + v);
    }
}

struct ChildProcess {
    pid_t pid = -1;
    std::string name;
    std::string output;
    std::thread reader;
};

std::unique_ptr<ChildProcess> spawn_agent(const std::filesystem::path& binary, const std::vector<std::string>& args,
                                          const std::string& name) {
    int fds[2];
    if (pipe(fds) != 0) throw Error(ErrorCode::Io, "pipe failed");
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&fa, fds[0]);
    posix_spawn_file_actions_addclose(&fa, fds[1]);

    std::vector<std::string> full{binary.string()};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : full) argv.push_back(a.data());
    argv.push_back(nullptr);

    auto child = std::make_unique<ChildProcess>();
    child->name = name;
    int rc = posix_spawn(&child->pid, binary.c_str(), &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    close(fds[1]);
    if (rc != 0) {
        close(fds[0]);
        throw Error(ErrorCode::Io, "cannot start " + binary.string());
    }
    int fd = fds[0];
    auto* out = &child->output;
    child->reader = std::thread([fd, out] {
        char buf[4096];
        ssize_t n;
        while ((n = read(fd, buf, sizeof buf)) > 0) out->append(buf, static_cast<std::size_t>(n));
        close(fd);
    });
    return child;
}

int wait_child(ChildProcess& c, std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    int status = 0;
    for (;;) {
        pid_t r = waitpid(c.pid, &status, WNOHANG);
        if (r == c.pid) break;
        if (Clock::now() >= deadline) {
            kill(c.pid, SIGKILL);
            waitpid(c.pid, &status, 0);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (c.reader.joinable()) c.reader.join();
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

enum class WaitOutcome { quiescent, violation, stalled, deadline };

/// Polls until every group is quiescent and `idle()` holds, a violation
/// shows up, frames stop flowing for stall_timeout, or the deadline passes.
template <class Idle, class HasViolations>
WaitOutcome wait_for_run(const Hub& hub, const RunOptions& o, Idle idle, HasViolations has_violations) {
    const auto start = Clock::now();
    auto last_change = start;
    auto last_frames = hub.total_frames();
    for (;;) {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        auto now = Clock::now();
        auto frames = hub.total_frames();
        if (frames != last_frames) {
            last_frames = frames;
            last_change = now;
        }
        if (!hub.groups().empty() && hub.all_quiescent() && idle()) return WaitOutcome::quiescent;
        if (has_violations()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
            return WaitOutcome::violation;
        }
        if (now - start >= o.deadline) return WaitOutcome::deadline;
        if (now - last_change >= o.stall_timeout && idle()) return WaitOutcome::stalled;
    }
}

void note_outcome(WaitOutcome w, const RunOptions& o, RunReport& report) {
    if (w == WaitOutcome::deadline)
        report.violations.push_back("Deadline: not quiescent after " + std::to_string(o.deadline.count()) + " ms");
    if (w == WaitOutcome::stalled) report.violations.push_back("Stalled: no progress and the run is not quiescent");
}

RunReport run_in_process(const Scenario& s, const RunOptions& o) {
    RunReport report;
    report.scenario = s.name;
    Hub hub(hub_config(s, o));
    for (const auto& a : s.agents) hub.registry().register_agent(a.profile);

    std::vector<std::unique_ptr<Client>> clients;
    std::vector<std::shared_ptr<InProcessLink>> links;
    Client* initiator = nullptr;
    for (const auto& a : s.agents) {
        auto c = make_client(s, a, o.data_dir);
        auto* raw = c.get();
        auto link = std::make_shared<InProcessLink>(hub, a.profile.agent_name, hub.config().auth_token,
                                                    [raw](std::string_view line) { raw->on_line(line); });
        c->set_link(link);
        if (a.profile.agent_name == s.task.initiator) initiator = raw;
        clients.push_back(std::move(c));
        links.push_back(std::move(link));
    }
    for (auto& c : clients) c->start();
    initiator->kickoff(s.task.goal, s.task.max_turns);

    auto all_idle = [&] {
        for (auto& c : clients) {
            if (!c->idle()) return false;
        }
        return true;
    };
    auto any_violation = [&] {
        for (auto& c : clients) {
            if (!c->violations().empty()) return true;
        }
        return false;
    };
    note_outcome(wait_for_run(hub, o, all_idle, any_violation), o, report);
    for (auto& c : clients) c->stop();

    std::map<std::string, std::map<std::string, std::vector<std::string>>> copies;
    for (auto& c : clients) {
        for (const auto& v : c->violations()) report.violations.push_back(v);
        for (const auto& id : c->group_ids()) copies[c->name()][id] = c->group(id)->lines;
    }
    finish_report(report, hub);
    check_convergence(report.groups, hub.groups(), copies, report.violations);
    clients.clear();
    links.clear();
    return report;
}

RunReport run_processes(const Scenario& s, const RunOptions& o) {
    if (o.agent_binary.empty()) invalid("processes mode needs the agent binary");
    RunReport report;
    report.scenario = s.name;
    Hub hub(hub_config(s, o));
    for (const auto& a : s.agents) hub.registry().register_agent(a.profile);
    TcpFrontend frontend(hub, net::parse_address("127.0.0.1:0"));
    frontend.start();

    auto scenario_file = std::filesystem::temp_directory_path() / ("agentnet-" + make_uuid_v4() + ".json");
    {
        std::ofstream out(scenario_file, std::ios::binary);
        out << s.raw.dump();
    }
    const auto address = net::to_string(frontend.address());

    std::vector<std::unique_ptr<ChildProcess>> children;
    for (const auto& a : s.agents) {
        children.push_back(spawn_agent(o.agent_binary,
                                       {"agent", "--server", address, "--scenario", scenario_file.string(), "--name",
                                        a.profile.agent_name, "--token", hub.config().auth_token},
                                       a.profile.agent_name));
    }

    const auto connect_deadline = Clock::now() + std::chrono::seconds(20);
    bool all_online = false;
    while (!all_online && Clock::now() < connect_deadline) {
        all_online = true;
        for (const auto& a : s.agents) {
            auto sess = hub.session(a.profile.agent_name);
            if (!sess || sess->status != SessionStatus::online) all_online = false;
        }
        if (!all_online) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }

    if (!all_online) {
        report.violations.push_back("ServerUnreachable: agents did not connect");
    } else {
        json kick = {{"op", wire::kKickoff}, {"goal", s.task.goal}};
        if (s.task.max_turns) kick["max_turns"] = *s.task.max_turns;
        hub.send_control(s.task.initiator, kick);
        note_outcome(wait_for_run(hub, o, [] { return true; }, [] { return false; }), o, report);
    }

    for (const auto& a : s.agents) hub.send_control(a.profile.agent_name, {{"op", wire::kFinish}});
    std::map<std::string, std::map<std::string, std::vector<std::string>>> copies;
    for (auto& c : children) {
        int code = wait_child(*c, std::chrono::seconds(30));
        json out;
        try {
            out = json::parse(c->output);
        } catch (const json::exception&) {
            report.violations.push_back("AgentFailure: " + c->name + " exited with " + std::to_string(code) +
                                        " and no report");
            continue;
        }
        const auto violations = out.value("violations", json::array());
        for (const auto& v : violations) report.violations.push_back(v.get<std::string>());
        const auto groups = out.value("groups", json::object());
        for (const auto& [id, lines] : groups.items())
            copies[c->name][id] = lines.get<std::vector<std::string>>();
        if (code != 0) report.violations.push_back("AgentFailure: " + c->name + " exited with " + std::to_string(code));
    }
    frontend.stop();
    std::filesystem::remove(scenario_file);

    finish_report(report, hub);
    check_convergence(report.groups, hub.groups(), copies, report.violations);
    return report;
}

} // namespace

Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir) {
    check_keys(j, {"name", "agents", "task", "expectations"}, "scenario");
    Scenario s;
    s.raw = j;
    try {
        s.name = j.at("name").get<std::string>();
        if (s.name.empty()) invalid("scenario name is empty");

        std::set<std::string> names;
        for (const auto& a : j.at("agents")) {
            check_keys(a, {"profile", "integrated_agent", "latency_ms", "script", "policy"}, "agent");
            ScenarioAgent agent;
            agent.profile = profile_from_json(a.at("profile"));
            agent.integrated_agent = agent_kind_from_string(a.value("integrated_agent", std::string{"none"}));
            agent.latency_ms = a.value("latency_ms", std::int64_t{0});
            if (agent.latency_ms < 0) invalid("latency_ms must be non-negative");
            agent.script = a.value("script", json::array());
            ScriptedPolicy probe(agent.script); // validates every record
            const auto policy = a.value("policy", std::string{"scripted"});
            if (policy != "scripted" && policy != "remote") invalid("unknown policy '" + policy + "'");
            agent.remote_policy = policy == "remote";
            if (agent.remote_policy && !agent.script.empty()) invalid(agent.profile.agent_name + " has both a script and the remote policy");
            if (!names.insert(agent.profile.agent_name).second) invalid("duplicate agent " + agent.profile.agent_name);
            s.agents.push_back(std::move(agent));
        }

        const auto& t = j.at("task");
        check_keys(t, {"goal", "initiator", "max_turns", "max_depth"}, "task");
        s.task.goal = t.at("goal").get<std::string>();
        s.task.initiator = t.at("initiator").get<std::string>();
        if (t.contains("max_turns")) s.task.max_turns = t.at("max_turns").get<std::int64_t>();
        s.task.max_depth = t.value("max_depth", std::int64_t{2});
        if (s.task.goal.empty()) invalid("task goal is empty");
        if (!names.count(s.task.initiator)) invalid("initiator " + s.task.initiator + " is not a scenario agent");
        if (s.task.max_turns && *s.task.max_turns < 1) invalid("max_turns must be positive");

        // Every agent a script mentions must exist.
        for (const auto& a : s.agents) {
            for (const auto& r : a.script) {
                for (const char* key : {"members", "next_speakers"}) {
                    if (!r.contains(key)) continue;
                    for (const auto& n : r.at(key)) {
                        if (!names.count(n.get<std::string>()))
                            invalid("script of " + a.profile.agent_name + " names unknown agent " + n.get<std::string>());
                    }
                }
            }
        }

        if (j.contains("expectations")) {
            const auto& e = j.at("expectations");
            check_keys(e, {"final_conclusion", "transcript_golden", "metric_bounds"}, "expectations");
            if (e.contains("final_conclusion")) s.expectations.final_conclusion = e.at("final_conclusion").get<std::string>();
            if (e.contains("transcript_golden"))
                s.expectations.transcript_golden = base_dir / e.at("transcript_golden").get<std::string>();
            const auto bounds = e.value("metric_bounds", json::object());
            for (const auto& [k, v] : bounds.items()) {
                MetricBound b;
                if (v.is_number()) {
                    b.min = b.max = v.get<double>();
                } else {
                    check_keys(v, {"min", "max"}, "metric bound " + k);
                    if (v.contains("min")) b.min = v.at("min").get<double>();
                    if (v.contains("max")) b.max = v.at("max").get<double>();
                }
                Metrics{}.get(k); // rejects unknown metric names
                s.expectations.metric_bounds[k] = b;
            }
        }
    } catch (const json::exception& e) {
        invalid(e.what());
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        invalid(path.string() + ": " + e.what());
    }
    return scenario_from_json(j, path.parent_path());
}

double Metrics::get(const std::string& name) const {
    if (name == "conversation_turns") return static_cast<double>(conversation_turns);
    if (name == "total_frames") return static_cast<double>(total_frames);
    if (name == "edges_full_flat") return static_cast<double>(edges_full_flat);
    if (name == "edges_nested") return static_cast<double>(edges_nested);
    if (name == "sync_tasks") return static_cast<double>(sync_tasks);
    if (name == "async_tasks") return static_cast<double>(async_tasks);
    if (name == "triggers_fired") return static_cast<double>(triggers_fired);
    const std::string prefix = "frames_per_kind.";
    if (name.rfind(prefix, 0) == 0) {
        auto kind = name.substr(prefix.size());
        if (!message_kind_from_string(kind)) invalid("unknown metric " + name);
        auto it = frames_per_kind.find(kind);
        return it == frames_per_kind.end() ? 0.0 : static_cast<double>(it->second);
    }
    invalid("unknown metric " + name);
}

json to_json(const Metrics& m) {
    return {{"conversation_turns", m.conversation_turns}, {"total_frames", m.total_frames},
            {"frames_per_kind", m.frames_per_kind},       {"edges_full_flat", m.edges_full_flat},
            {"edges_nested", m.edges_nested},             {"sync_tasks", m.sync_tasks},
            {"async_tasks", m.async_tasks},               {"triggers_fired", m.triggers_fired}};
}

Metrics compute_metrics(const std::vector<GroupTranscript>& groups, const std::vector<TeamTree>& trees) {
    Metrics m;
    for (const auto& g : groups) {
        for (const auto& line : g.lines) {
            auto msg = decode_message(line);
            const auto& p = msg.payload;
            ++m.total_frames;
            ++m.frames_per_kind[std::string(to_string(p.kind))];
            if (is_conversation_kind(p.kind)) ++m.conversation_turns;
            if (p.kind == MessageKind::sync_task_assignment) m.sync_tasks += p.next_speaker.size();
            if (p.kind == MessageKind::async_task_assignment) m.async_tasks += p.next_speaker.size();
            if (p.kind == MessageKind::pause_and_trigger && p.triggers) m.triggers_fired += p.triggers->size();
        }
    }
    for (const auto& t : trees) {
        m.edges_nested += edges_nested(t);
        m.edges_full_flat += edges_full_flat(t);
    }
    return m;
}

json to_json(const RunReport& r) {
    json groups = json::array();
    for (const auto& g : r.groups) {
        json frames = json::array();
        for (const auto& line : g.lines) frames.push_back(json::parse(line));
        groups.push_back({{"comm_id", g.comm_id}, {"frames", std::move(frames)}});
    }
    json trees = json::array();
    for (const auto& t : r.trees) trees.push_back(to_json(t));
    json j = {{"scenario", r.scenario},
              {"groups", std::move(groups)},
              {"team_tree", std::move(trees)},
              {"metrics", to_json(r.metrics)},
              {"violations", r.violations},
              {"expectation_failures", r.expectation_failures},
              {"passed", r.passed()}};
    j["conclusion"] = r.conclusion ? json(*r.conclusion) : json(nullptr);
    return j;
}

std::string normalized_transcript(const RunReport& r) {
    std::string all;
    for (const auto& g : r.groups) {
        for (const auto& line : g.lines) all += line;
    }
    return normalize_uuids(all);
}

void check_expectations(const Scenario& s, RunReport& report, const std::optional<std::filesystem::path>& golden_dir) {
    const auto& e = s.expectations;
    if (e.final_conclusion && report.conclusion != e.final_conclusion) {
        report.expectation_failures.push_back("final_conclusion: expected '" + *e.final_conclusion + "', got " +
                                              (report.conclusion ? "'" + *report.conclusion + "'" : "none"));
    }
    for (const auto& [name, b] : e.metric_bounds) {
        double v = report.metrics.get(name);
        if ((b.min && v < *b.min) || (b.max && v > *b.max)) {
            std::ostringstream msg;
            msg << name << " = " << v << " outside [" << (b.min ? std::to_string(*b.min) : "-inf") << ", "
                << (b.max ? std::to_string(*b.max) : "inf") << "]";
            report.expectation_failures.push_back(msg.str());
        }
    }
    std::optional<std::filesystem::path> golden = e.transcript_golden;
    if (golden_dir) golden = *golden_dir / (s.name + ".ndjson");
    if (golden) {
        std::string expected;
        try {
            expected = read_file(*golden);
        } catch (const Error&) {
            report.expectation_failures.push_back("transcript_golden: cannot read " + golden->string());
            return;
        }
        auto actual = normalized_transcript(report);
        if (actual != expected) {
            std::istringstream a(actual), x(expected);
            std::string la, lx;
            std::size_t line = 1;
            while (true) {
                bool ga = static_cast<bool>(std::getline(a, la));
                bool gx = static_cast<bool>(std::getline(x, lx));
                if (!ga && !gx) break;
                if (!ga || !gx || la != lx) break;
                ++line;
            }
            report.expectation_failures.push_back("transcript_golden: differs from " + golden->string() + " at line " +
                                                  std::to_string(line));
        }
    }
}

RunReport run_scenario(const Scenario& scenario, const RunOptions& options,
                       const std::optional<std::filesystem::path>& golden_dir) {
    auto report = options.processes ? run_processes(scenario, options) : run_in_process(scenario, options);
    check_expectations(scenario, report, golden_dir);
    return report;
}

ReplayResult replay_lines(const std::vector<std::string>& lines) {
    ReplayResult r;
    std::uint64_t expected_seq = 0;
    for (const auto& line : lines) {
        AgentMessage msg;
        try {
            msg = decode_message(line.empty() || line.back() != '\n' ? line + "\n" : line);
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedLog, "frame " + std::to_string(expected_seq) + ": " + e.detail());
        }
        const auto seq = msg.seq.value_or(expected_seq);
        const auto at = "@" + std::to_string(seq);
        if (!msg.seq || *msg.seq != expected_seq) {
            r.violations.push_back("Gap" + at);
            return r;
        }
        ++expected_seq;
        if (is_conversation_kind(msg.payload.kind)) ++r.conversation_frames;
        try {
            r.machine = advance(r.machine, msg);
        } catch (const Error& e) {
            r.violations.push_back((e.code() == ErrorCode::TurnBudgetExhausted ? std::string("TraceBound")
                                                                                 : std::string(to_string(e.code()))) +
                                   at);
            return r;
        }
        if (r.conversation_frames > static_cast<std::uint64_t>(r.machine.max_turns()) + 1) {
            r.violations.push_back("TraceBound" + at);
            return r;
        }
    }
    return r;
}

std::vector<std::string> replay_transcript(const std::filesystem::path& log) {
    std::ifstream in(log, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + log.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        lines.push_back(line + "\n");
    }
    return replay_lines(lines).violations;
}

int run_agent_process(const Scenario& s, const std::string& agent_name, const net::Address& server,
                      const std::string& auth_token, std::ostream& out) {
    const ScenarioAgent* me = nullptr;
    for (const auto& a : s.agents) {
        if (a.profile.agent_name == agent_name) me = &a;
    }
    if (!me) invalid("no agent named " + agent_name + " in scenario " + s.name);

    auto client = make_client(s, *me, {});
    auto* raw = client.get();
    auto link = std::make_shared<TcpLink>(
        server, agent_name, auth_token, me->profile, [raw](std::string_view line) { raw->on_line(line); },
        [raw] { raw->on_closed(); });
    client->set_link(link);
    client->start();
    const auto deadline = Clock::now() + std::chrono::minutes(3);
    while (!client->closed() && Clock::now() < deadline) std::this_thread::sleep_for(std::chrono::milliseconds(2));
    client->stop();

    json groups = json::object();
    for (const auto& id : client->group_ids()) groups[id] = client->group(id)->lines;
    out << json{{"agent", agent_name}, {"violations", client->violations()}, {"groups", groups}}.dump() << "\n";
    out.flush();
    link->close();
    return client->violations().empty() ? 0 : 1;
}

} // namespace agentnet
