#pragma once

// Central hub: session management, group setup and per-group ordered routing.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentnet/conversation_fsm.hpp"
#include "agentnet/protocol.hpp"
#include "agentnet/registry.hpp"

namespace agentnet {

class EventLog;

struct ServerConfig {
    std::string listen = "127.0.0.1:7420";
    std::string auth_token = "agentnet";
    std::int64_t max_team_up_depth = 2;
    std::int64_t default_max_turns = 20;
    std::size_t offline_queue_cap = 1024;
    std::filesystem::path data_dir; // empty: nothing persisted
};

nlohmann::json to_json(const ServerConfig& cfg);
/// Reads any subset of the ServerConfig keys over `base`.
ServerConfig server_config_from_json(const nlohmann::json& j, ServerConfig base = {});

/// Outbound side of one agent connection. push() receives complete NDJSON lines.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void push(std::string_view line) = 0;
};

enum class SessionStatus { online, offline };

struct Session {
    std::string agent_name;
    SessionStatus status = SessionStatus::offline;
    std::size_t pending = 0;
};

struct ParentTask {
    std::string comm_id;
    std::string task_id;

    bool operator==(const ParentTask&) const = default;
};

struct GroupSpec {
    std::string initiator;
    std::vector<std::string> team_members;
    std::string goal;
    std::int64_t team_up_depth = 0;
    std::optional<std::int64_t> max_turns;
    std::optional<ParentTask> parent_task;
};

nlohmann::json to_json(const GroupSpec& spec);
GroupSpec group_spec_from_json(const nlohmann::json& j);

/// Public view of one group chat.
struct GroupRecord {
    std::string comm_id;
    std::string goal;
    std::vector<std::string> team_members;
    std::string initiator;
    std::int64_t team_up_depth = 0;
    std::optional<ParentTask> parent_task;
    std::uint64_t next_seq = 0;
    std::uint64_t created_index = 0;
    ChatMachine machine;

    ConversationState fsm_state() const { return machine.state(); }
    std::int64_t turn_count() const { return machine.turn_count(); }
    std::int64_t max_turns() const { return machine.max_turns(); }
    const std::set<std::string>& expected_speakers() const { return machine.expected_speakers(); }
};

struct DeliveryReport {
    std::uint64_t seq = 0;
    std::vector<std::string> delivered;
    std::vector<std::string> deferred;
    std::size_t dropped = 0; // frames evicted from full offline queues

    bool loss() const { return dropped > 0; }
};

nlohmann::json to_json(const DeliveryReport& r);
DeliveryReport delivery_report_from_json(const nlohmann::json& j);

class Hub {
public:
    explicit Hub(ServerConfig config, std::shared_ptr<Registry> registry = nullptr);
    ~Hub();

    Hub(const Hub&) = delete;
    Hub& operator=(const Hub&) = delete;

    const ServerConfig& config() const { return config_; }
    Registry& registry() { return *registry_; }
    const Registry& registry() const { return *registry_; }

    Session connect(const std::string& agent_name, const std::string& auth_token, std::shared_ptr<Channel> channel);
    void disconnect(const std::string& agent_name);
    std::optional<Session> session(const std::string& agent_name) const;

    std::vector<SearchHit> search(const SearchQuery& query) const { return registry_->search_agents(query); }

    std::string setup_group(const GroupSpec& spec);
    DeliveryReport route(const AgentMessage& msg);

    /// Pushes a control envelope (one JSON line) to an online agent.
    bool send_control(const std::string& agent_name, const nlohmann::json& envelope);

    std::optional<GroupRecord> group(const std::string& comm_id) const;
    std::vector<GroupRecord> groups() const; // creation order
    /// Encoded frames with seq >= from_seq.
    std::vector<std::string> transcript(const std::string& comm_id, std::uint64_t from_seq = 0) const;

    /// Every group is concluded and owes no task results.
    bool all_quiescent() const;
    std::uint64_t total_frames() const;

private:
    struct SessionSlot;
    struct Group;

    std::shared_ptr<SessionSlot> slot(const std::string& agent_name);
    std::shared_ptr<Group> find_group(const std::string& comm_id) const;
    DeliveryReport commit_locked(Group& g, AgentMessage msg, ChatMachine next);
    void deliver(const std::string& agent_name, const std::string& line, DeliveryReport& report);

    ServerConfig config_;
    std::shared_ptr<Registry> registry_;

    mutable std::mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;

    mutable std::shared_mutex groups_mu_;
    std::map<std::string, std::shared_ptr<Group>> groups_;
    std::uint64_t groups_created_ = 0;
};

} // namespace agentnet
