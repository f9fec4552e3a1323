#pragma once

// Client runtime: local data blocks, the inbound dispatch loop and the
// bridge to the integrated agent.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "agentnet/conversation_fsm.hpp"
#include "agentnet/integrated_agent.hpp"
#include "agentnet/link.hpp"
#include "agentnet/policy.hpp"
#include "agentnet/records.hpp"
#include "agentnet/server.hpp"
#include "agentnet/teaming.hpp"

namespace agentnet {

class EventLog;

struct ClientConfig {
    std::string agent_name;
    std::filesystem::path data_dir; // empty: no local persistence
    std::chrono::milliseconds poll_interval{50};
    std::chrono::milliseconds task_timeout{60000};
    std::int64_t max_team_up_depth = 2;
};

/// Local mirror of one group chat.
struct GroupInfo {
    std::string comm_id;
    std::string goal;
    std::vector<std::string> team_members;
    std::string initiator;
    std::int64_t team_up_depth = 0;
    std::int64_t max_turns = 0;
    std::optional<ParentTask> parent_task; // known only to the spawner
    ChatMachine machine;
    std::optional<std::string> conclusion;
    std::vector<AgentMessage> transcript; // seq-ordered, gapless
    std::vector<std::string> lines;       // the same frames, encoded

    std::uint64_t next_seq() const { return transcript.size(); }
};

class Client {
public:
    Client(ClientConfig config, std::unique_ptr<Policy> policy, std::unique_ptr<IntegratedAgent> agent);
    ~Client();

    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    const std::string& name() const { return config_.agent_name; }

    /// Must be set before any inbound line is processed.
    void set_link(std::shared_ptr<ServerLink> link);

    // Inbound side; safe from any thread.
    void on_line(std::string_view line);
    void on_closed();
    /// Queues team formation for `goal` (what a kickoff envelope does).
    void kickoff(std::string goal, std::optional<std::int64_t> max_turns = std::nullopt);

    /// Runs the dispatch loop on its own thread.
    void start();
    /// Drains queued input, waits for running tasks, stops the loop.
    void stop();

    /// Processes at most one queued item on the calling thread.
    bool run_once();
    /// run_once until the inbox is empty and no task is running.
    std::size_t pump_until_idle(std::chrono::milliseconds timeout = std::chrono::milliseconds{10000});

    bool idle() const;
    /// The connection ended or the server announced the end of the run.
    bool closed() const;

    // Snapshots.
    std::optional<GroupInfo> group(const std::string& comm_id) const;
    std::vector<std::string> group_ids() const; // first-seen order
    std::vector<TaskRecord> tasks() const;
    std::vector<ContactEntry> contacts() const;
    std::vector<std::string> violations() const;
    std::vector<TeamFormation> formations() const;

    // Operations. Called from the dispatch context.

    /// Applies one routed frame. Throws Error(StaleSeq) on a gap and
    /// Error(UnknownGroup) for a group never announced to this client.
    void handle_incoming(const AgentMessage& msg);

    /// Builds the local task record for the part of `assignment` naming self.
    TaskRecord extract_task(const GroupInfo& group, const AgentMessage& assignment);

    /// Runs `task` on `agent` and returns the task_result frame. Blocks
    /// until completion, failure (conclusion "ERROR: ...") or timeout.
    AgentMessage execute_assigned_task(TaskRecord& task, IntegratedAgent* agent);

    /// Asks the policy for the final answer and sends the conclusion frame.
    AgentMessage conclude_group(GroupInfo& group);

    std::vector<ContactEntry> update_contacts(const GroupInfo& group);

private:
    struct Item {
        enum class Kind { line, kickoff, closed } kind;
        std::string text;
        std::optional<std::int64_t> max_turns;
    };

    void dispatch_loop();
    void process(const Item& item);
    void process_frame(const AgentMessage& msg);
    void resync(const std::string& comm_id);
    void apply(GroupInfo& g, const AgentMessage& msg);
    void act(GroupInfo& g);
    void on_assignment(GroupInfo& g, const AgentMessage& msg);
    void on_conclusion(GroupInfo& g, const AgentMessage& msg);
    void start_task(TaskRecord task);
    void send(const AgentMessage& msg);
    void record_violation(const std::string& v);
    void persist_task(const TaskRecord& t);
    void persist_group(const GroupInfo& g);
    ConversationView view_of(const GroupInfo& g) const;
    std::vector<std::string> resolve_triggers(const GroupInfo& g, const std::vector<std::string>& raw) const;

    ClientConfig config_;
    std::unique_ptr<Policy> policy_;
    std::unique_ptr<IntegratedAgent> agent_;
    std::shared_ptr<ServerLink> link_;

    mutable std::mutex inbox_mu_;
    std::condition_variable inbox_cv_;
    std::deque<Item> inbox_;
    bool busy_ = false; // an item is being processed
    bool closed_ = false;
    bool stopping_ = false;
    std::thread dispatcher_;

    mutable std::mutex state_mu_; // everything below
    std::map<std::string, GroupInfo> groups_;
    std::vector<std::string> group_order_;
    std::map<std::string, TaskRecord> tasks_;
    std::map<std::string, ContactEntry> contacts_;
    std::map<std::string, ParentTask> spawned_; // child comm_id -> parent task
    std::map<std::pair<std::string, std::string>, std::string> my_async_; // (comm_id, assignee) -> task id
    std::vector<std::string> violations_;
    std::vector<TeamFormation> formations_;
    std::set<std::string> propagated_; // child groups already reported to the parent

    std::mutex send_mu_;
    mutable std::mutex workers_mu_;
    std::condition_variable workers_cv_;
    std::size_t running_tasks_ = 0;
    std::vector<std::thread> workers_;

    std::unique_ptr<EventLog> contacts_log_;
    std::unique_ptr<EventLog> groups_log_;
    std::unique_ptr<EventLog> tasks_log_;
};

} // namespace agentnet
