#include "agentnet/server.hpp"

#include <algorithm>

#include "agentnet/error.hpp"
#include "agentnet/event_log.hpp"
#include "agentnet/ids.hpp"

namespace agentnet {

using nlohmann::json;

json to_json(const ServerConfig& cfg) {
    return {
        {"listen", cfg.listen},
        {"auth_token", cfg.auth_token},
        {"max_team_up_depth", cfg.max_team_up_depth},
        {"default_max_turns", cfg.default_max_turns},
        {"offline_queue_cap", cfg.offline_queue_cap},
        {"data_dir", cfg.data_dir.string()},
    };
}

ServerConfig server_config_from_json(const json& j, ServerConfig base) {
    if (!j.is_object()) throw Error(ErrorCode::ScenarioInvalid, "server config must be a JSON object");
    try {
        base.listen = j.value("listen", base.listen);
        base.auth_token = j.value("auth_token", base.auth_token);
        base.max_team_up_depth = j.value("max_team_up_depth", base.max_team_up_depth);
        base.default_max_turns = j.value("default_max_turns", base.default_max_turns);
        base.offline_queue_cap = j.value("offline_queue_cap", base.offline_queue_cap);
        if (j.contains("data_dir")) base.data_dir = j.at("data_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ScenarioInvalid, std::string("server config: ") + e.what());
    }
    return base;
}

json to_json(const GroupSpec& spec) {
    json j = {
        {"initiator", spec.initiator},
        {"team_members", spec.team_members},
        {"goal", spec.goal},
        {"team_up_depth", spec.team_up_depth},
    };
    if (spec.max_turns) j["max_turns"] = *spec.max_turns;
    if (spec.parent_task) j["parent_task"] = {{"comm_id", spec.parent_task->comm_id}, {"task_id", spec.parent_task->task_id}};
    return j;
}

GroupSpec group_spec_from_json(const json& j) {
    GroupSpec spec;
    try {
        spec.initiator = j.at("initiator").get<std::string>();
        spec.team_members = j.value("team_members", std::vector<std::string>{});
        spec.goal = j.at("goal").get<std::string>();
        spec.team_up_depth = j.value("team_up_depth", std::int64_t{0});
        if (j.contains("max_turns")) spec.max_turns = j.at("max_turns").get<std::int64_t>();
        if (j.contains("parent_task")) {
            const auto& pt = j.at("parent_task");
            spec.parent_task = ParentTask{pt.at("comm_id").get<std::string>(), pt.at("task_id").get<std::string>()};
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("setup_group: ") + e.what());
    }
    return spec;
}

json to_json(const DeliveryReport& r) {
    return {{"seq", r.seq}, {"delivered", r.delivered}, {"deferred", r.deferred}, {"dropped", r.dropped}};
}

DeliveryReport delivery_report_from_json(const json& j) {
    DeliveryReport r;
    r.seq = j.value("seq", std::uint64_t{0});
    r.delivered = j.value("delivered", std::vector<std::string>{});
    r.deferred = j.value("deferred", std::vector<std::string>{});
    r.dropped = j.value("dropped", std::size_t{0});
    return r;
}

struct Hub::SessionSlot {
    std::mutex mu;
    std::string agent_name;
    SessionStatus status = SessionStatus::offline;
    std::shared_ptr<Channel> channel;
    std::deque<std::string> pending;
};

struct Hub::Group {
    std::mutex mu;
    GroupRecord record;
    std::vector<std::string> frames;
    std::unique_ptr<EventLog> log;
};

Hub::Hub(ServerConfig config, std::shared_ptr<Registry> registry) : config_(std::move(config)), registry_(std::move(registry)) {
    if (!registry_) {
        registry_ = config_.data_dir.empty() ? std::make_shared<Registry>()
                                             : std::make_shared<Registry>(config_.data_dir / "registry.ndjson");
    }
}

Hub::~Hub() = default;

std::shared_ptr<Hub::SessionSlot> Hub::slot(const std::string& agent_name) {
    std::lock_guard lock(sessions_mu_);
    auto& s = sessions_[agent_name];
    if (!s) {
        s = std::make_shared<SessionSlot>();
        s->agent_name = agent_name;
    }
    return s;
}

Session Hub::connect(const std::string& agent_name, const std::string& auth_token, std::shared_ptr<Channel> channel) {
    if (auth_token != config_.auth_token) throw Error(ErrorCode::AuthFailed, "bad auth token for " + agent_name);
    if (!registry_->contains(agent_name)) throw Error(ErrorCode::UnknownAgent, agent_name);
    auto s = slot(agent_name);
    std::lock_guard lock(s->mu);
    if (s->status == SessionStatus::online) throw Error(ErrorCode::AlreadyConnected, agent_name);
    s->channel = std::move(channel);
    s->status = SessionStatus::online;
    while (!s->pending.empty()) {
        s->channel->push(s->pending.front());
        s->pending.pop_front();
    }
    return {agent_name, SessionStatus::online, 0};
}

void Hub::disconnect(const std::string& agent_name) {
    std::shared_ptr<SessionSlot> s;
    {
        std::lock_guard lock(sessions_mu_);
        auto it = sessions_.find(agent_name);
        if (it != sessions_.end()) s = it->second;
    }
    if (!s) throw Error(ErrorCode::NotConnected, agent_name);
    std::lock_guard lock(s->mu);
    if (s->status != SessionStatus::online) throw Error(ErrorCode::NotConnected, agent_name);
    s->status = SessionStatus::offline;
    s->channel.reset();
}

std::optional<Session> Hub::session(const std::string& agent_name) const {
    std::shared_ptr<SessionSlot> s;
    {
        std::lock_guard lock(sessions_mu_);
        auto it = sessions_.find(agent_name);
        if (it == sessions_.end()) return std::nullopt;
        s = it->second;
    }
    std::lock_guard lock(s->mu);
    return Session{s->agent_name, s->status, s->pending.size()};
}

void Hub::deliver(const std::string& agent_name, const std::string& line, DeliveryReport& report) {
    auto s = slot(agent_name);
    std::lock_guard lock(s->mu);
    if (s->status == SessionStatus::online && s->channel) {
        s->channel->push(line);
        report.delivered.push_back(agent_name);
        return;
    }
    s->pending.push_back(line);
    if (s->pending.size() > config_.offline_queue_cap) {
        s->pending.pop_front();
        ++report.dropped;
    }
    report.deferred.push_back(agent_name);
}

bool Hub::send_control(const std::string& agent_name, const json& envelope) {
    auto s = slot(agent_name);
    std::lock_guard lock(s->mu);
    if (s->status != SessionStatus::online || !s->channel) return false;
    auto line = envelope.dump();
    line.push_back('\n');
    s->channel->push(line);
    return true;
}

std::shared_ptr<Hub::Group> Hub::find_group(const std::string& comm_id) const {
    std::shared_lock lock(groups_mu_);
    auto it = groups_.find(comm_id);
    return it == groups_.end() ? nullptr : it->second;
}

DeliveryReport Hub::commit_locked(Group& g, AgentMessage msg, ChatMachine next) {
    msg.seq = g.record.next_seq;
    auto line = encode_message(msg);
    ++g.record.next_seq;
    g.record.machine = std::move(next);
    g.frames.push_back(line);
    if (g.log) g.log->append_line(line);

    DeliveryReport report;
    report.seq = *msg.seq;
    for (const auto& m : g.record.team_members) deliver(m, line, report);
    return report;
}

std::string Hub::setup_group(const GroupSpec& spec) {
    if (spec.initiator.empty()) throw Error(ErrorCode::UnknownMember, "initiator must be named");
    std::vector<std::string> members{spec.initiator};
    for (const auto& m : spec.team_members) {
        if (std::find(members.begin(), members.end(), m) == members.end()) members.push_back(m);
    }
    for (const auto& m : members) {
        if (!registry_->contains(m)) throw Error(ErrorCode::UnknownMember, m);
    }
    if (spec.team_up_depth < 0) throw Error(ErrorCode::DepthExceeded, "team_up_depth must be non-negative");
    if (spec.team_up_depth > config_.max_team_up_depth)
        throw Error(ErrorCode::DepthExceeded, "team_up_depth " + std::to_string(spec.team_up_depth) + " exceeds max " +
                                                  std::to_string(config_.max_team_up_depth));
    const auto max_turns = spec.max_turns.value_or(config_.default_max_turns);
    if (max_turns < 1) throw Error(ErrorCode::ValidationFailed, "max_turns must be positive");

    if (spec.parent_task) {
        auto parent = find_group(spec.parent_task->comm_id);
        if (!parent) throw Error(ErrorCode::InvalidParentTask, "unknown parent group " + spec.parent_task->comm_id);
        std::lock_guard lock(parent->mu);
        const auto& pm = parent->record.machine;
        if (!pm.is_member(spec.initiator))
            throw Error(ErrorCode::InvalidParentTask, spec.initiator + " is not a member of the parent group");
        const auto& id = spec.parent_task->task_id;
        auto owner = pm.open_sync_tasks().count(id) ? pm.open_sync_tasks().at(id)
                     : pm.open_async_tasks().count(id) ? pm.open_async_tasks().at(id)
                                                       : std::string{};
        if (owner != spec.initiator)
            throw Error(ErrorCode::InvalidParentTask, "task " + id + " is not open for " + spec.initiator);
        if (spec.team_up_depth != parent->record.team_up_depth + 1)
            throw Error(ErrorCode::InvalidParentTask, "sub-group depth must be parent depth + 1");
    }

    auto g = std::make_shared<Group>();
    auto& rec = g->record;
    rec.comm_id = make_uuid_v4();
    rec.goal = spec.goal;
    rec.team_members = members;
    rec.initiator = spec.initiator;
    rec.team_up_depth = spec.team_up_depth;
    rec.parent_task = spec.parent_task;
    rec.machine = ChatMachine(max_turns);
    if (!config_.data_dir.empty())
        g->log = std::make_unique<EventLog>(config_.data_dir / "transcripts" / (rec.comm_id + ".ndjson"));

    std::lock_guard glock(g->mu);
    {
        std::unique_lock lock(groups_mu_);
        rec.created_index = groups_created_++;
        groups_.emplace(rec.comm_id, g);
    }

    AgentMessage notice;
    notice.header = {std::string(kServerSender), HeaderState::communication, rec.comm_id};
    auto& p = notice.payload;
    p.kind = MessageKind::system_notice;
    p.goal = spec.goal;
    p.team_members = members;
    p.team_up_depth = spec.team_up_depth;
    p.max_turns = max_turns;
    std::string roster;
    for (const auto& m : members) roster += (roster.empty() ? "" : ", ") + m;
    p.content = "Group formed. Goal: " + spec.goal + ". Members: " + roster + ".";
    p.next_speaker = {spec.initiator};
    auto next = advance(rec.machine, notice);
    commit_locked(*g, std::move(notice), std::move(next));
    return rec.comm_id;
}

DeliveryReport Hub::route(const AgentMessage& msg) {
    auto violations = validate_message(msg);
    if (!violations.empty()) throw Error(ErrorCode::ValidationFailed, violations.front().field + " " + violations.front().rule);
    if (msg.seq) throw Error(ErrorCode::ValidationFailed, "seq is assigned by the server");
    if (msg.header.sender == kServerSender) throw Error(ErrorCode::SenderMismatch, "sender name is reserved");
    auto s = session(msg.header.sender);
    if (!s || s->status != SessionStatus::online) throw Error(ErrorCode::NotConnected, msg.header.sender);

    auto g = find_group(msg.header.comm_id);
    if (!g) throw Error(ErrorCode::UnknownGroup, msg.header.comm_id);
    std::lock_guard lock(g->mu);
    auto next = advance(g->record.machine, msg);
    auto report = commit_locked(*g, msg, std::move(next));

    const auto& machine = g->record.machine;
    if (machine.awaiting_forced_notice()) {
        AgentMessage notice;
        notice.header = {std::string(kServerSender), HeaderState::communication, g->record.comm_id};
        notice.payload.kind = MessageKind::system_notice;
        notice.payload.content = "Turn budget of " + std::to_string(machine.max_turns()) + " reached. " +
                                 g->record.initiator + " must conclude the group.";
        notice.payload.next_speaker = {g->record.initiator};
        auto forced = advance(machine, notice);
        commit_locked(*g, std::move(notice), std::move(forced));
    }
    return report;
}

std::optional<GroupRecord> Hub::group(const std::string& comm_id) const {
    auto g = find_group(comm_id);
    if (!g) return std::nullopt;
    std::lock_guard lock(g->mu);
    return g->record;
}

std::vector<GroupRecord> Hub::groups() const {
    std::vector<std::shared_ptr<Group>> all;
    {
        std::shared_lock lock(groups_mu_);
        for (const auto& [_, g] : groups_) all.push_back(g);
    }
    std::vector<GroupRecord> out;
    for (const auto& g : all) {
        std::lock_guard lock(g->mu);
        out.push_back(g->record);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.created_index < b.created_index; });
    return out;
}

std::vector<std::string> Hub::transcript(const std::string& comm_id, std::uint64_t from_seq) const {
    auto g = find_group(comm_id);
    if (!g) throw Error(ErrorCode::UnknownGroup, comm_id);
    std::lock_guard lock(g->mu);
    if (from_seq >= g->frames.size()) return {};
    return {g->frames.begin() + static_cast<std::ptrdiff_t>(from_seq), g->frames.end()};
}

bool Hub::all_quiescent() const {
    for (const auto& g : groups()) {
        if (!is_quiescent(g.machine)) return false;
    }
    return true;
}

std::uint64_t Hub::total_frames() const {
    std::uint64_t n = 0;
    for (const auto& g : groups()) n += g.next_seq;
    return n;
}

} // namespace agentnet
