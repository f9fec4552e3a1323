#include "agentnet/client.hpp"

#include <algorithm>

#include "agentnet/error.hpp"
#include "agentnet/event_log.hpp"
#include "agentnet/ids.hpp"
#include "agentnet/teaming.hpp"
#include "agentnet/wire.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

bool names(const std::vector<std::string>& list, const std::string& who) {
    return std::find(list.begin(), list.end(), who) != list.end();
}

std::string describe(const Error& e) { return std::string(to_string(e.code())) + ": " + e.detail(); }

} // namespace

Client::Client(ClientConfig config, std::unique_ptr<Policy> policy, std::unique_ptr<IntegratedAgent> agent)
    : config_(std::move(config)), policy_(std::move(policy)), agent_(std::move(agent)) {
    if (!config_.data_dir.empty()) {
        contacts_log_ = std::make_unique<EventLog>(config_.data_dir / "contacts.ndjson");
        groups_log_ = std::make_unique<EventLog>(config_.data_dir / "groups.ndjson");
        tasks_log_ = std::make_unique<EventLog>(config_.data_dir / "tasks.ndjson");
    }
}

Client::~Client() { stop(); }

void Client::set_link(std::shared_ptr<ServerLink> link) { link_ = std::move(link); }

void Client::on_line(std::string_view line) {
    std::lock_guard lock(inbox_mu_);
    inbox_.push_back({Item::Kind::line, std::string(line), std::nullopt});
    inbox_cv_.notify_all();
}

void Client::on_closed() {
    std::lock_guard lock(inbox_mu_);
    inbox_.push_back({Item::Kind::closed, {}, std::nullopt});
    inbox_cv_.notify_all();
}

void Client::kickoff(std::string goal, std::optional<std::int64_t> max_turns) {
    std::lock_guard lock(inbox_mu_);
    inbox_.push_back({Item::Kind::kickoff, std::move(goal), max_turns});
    inbox_cv_.notify_all();
}

void Client::start() {
    std::lock_guard lock(inbox_mu_);
    if (dispatcher_.joinable()) return;
    stopping_ = false;
    dispatcher_ = std::thread([this] { dispatch_loop(); });
}

void Client::stop() {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    if (dispatcher_.joinable()) {
        std::unique_lock lock(inbox_mu_);
        inbox_cv_.wait_until(lock, deadline, [&] { return inbox_.empty() && !busy_; });
        stopping_ = true;
        inbox_cv_.notify_all();
    }
    if (dispatcher_.joinable()) dispatcher_.join();
    {
        std::unique_lock lock(workers_mu_);
        workers_cv_.wait_until(lock, deadline, [&] { return running_tasks_ == 0; });
    }
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(workers_mu_);
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
}

void Client::dispatch_loop() {
    std::unique_lock lock(inbox_mu_);
    for (;;) {
        inbox_cv_.wait(lock, [&] { return stopping_ || !inbox_.empty(); });
        if (inbox_.empty()) break;
        auto item = std::move(inbox_.front());
        inbox_.pop_front();
        busy_ = true;
        lock.unlock();
        process(item);
        lock.lock();
        busy_ = false;
        inbox_cv_.notify_all();
    }
}

bool Client::run_once() {
    Item item;
    {
        std::lock_guard lock(inbox_mu_);
        if (inbox_.empty()) return false;
        item = std::move(inbox_.front());
        inbox_.pop_front();
        busy_ = true;
    }
    process(item);
    std::lock_guard lock(inbox_mu_);
    busy_ = false;
    inbox_cv_.notify_all();
    return true;
}

std::size_t Client::pump_until_idle(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::size_t n = 0;
    while (std::chrono::steady_clock::now() < deadline) {
        if (run_once()) {
            ++n;
            continue;
        }
        if (idle()) break;
        std::unique_lock lock(inbox_mu_);
        inbox_cv_.wait_for(lock, std::chrono::milliseconds(5), [&] { return !inbox_.empty(); });
    }
    return n;
}

bool Client::idle() const {
    {
        std::lock_guard lock(inbox_mu_);
        if (!inbox_.empty() || busy_) return false;
    }
    std::lock_guard lock(workers_mu_);
    return running_tasks_ == 0;
}

bool Client::closed() const {
    std::lock_guard lock(inbox_mu_);
    return closed_;
}

std::optional<GroupInfo> Client::group(const std::string& comm_id) const {
    std::lock_guard lock(state_mu_);
    auto it = groups_.find(comm_id);
    if (it == groups_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> Client::group_ids() const {
    std::lock_guard lock(state_mu_);
    return group_order_;
}

std::vector<TaskRecord> Client::tasks() const {
    std::lock_guard lock(state_mu_);
    std::vector<TaskRecord> out;
    for (const auto& [id, t] : tasks_) out.push_back(t);
    return out;
}

std::vector<ContactEntry> Client::contacts() const {
    std::lock_guard lock(state_mu_);
    std::vector<ContactEntry> out;
    for (const auto& [name, c] : contacts_) out.push_back(c);
    return out;
}

std::vector<std::string> Client::violations() const {
    std::lock_guard lock(state_mu_);
    return violations_;
}

std::vector<TeamFormation> Client::formations() const {
    std::lock_guard lock(state_mu_);
    return formations_;
}

void Client::record_violation(const std::string& v) { violations_.push_back(v + " [" + config_.agent_name + "]"); }

void Client::process(const Item& item) {
    std::lock_guard lock(state_mu_);
    switch (item.kind) {
    case Item::Kind::closed: {
        std::lock_guard inbox(inbox_mu_);
        closed_ = true;
        return;
    }
    case Item::Kind::kickoff:
        try {
            std::vector<ContactEntry> contacts;
            for (const auto& [n, c] : contacts_) contacts.push_back(c);
            formations_.push_back(form_team({config_.agent_name, item.text, 0, item.max_turns, std::nullopt}, *policy_,
                                            *link_, contacts));
        } catch (const Error& e) {
            record_violation(describe(e) + " during team formation");
        }
        return;
    case Item::Kind::line: break;
    }

    json j;
    try {
        j = json::parse(item.text);
    } catch (const json::exception& e) {
        record_violation(std::string("MalformedFrame: ") + e.what());
        return;
    }
    if (wire::is_control(j)) {
        if (j.at("op") == wire::kKickoff) {
            try {
                std::vector<ContactEntry> contacts;
                for (const auto& [n, c] : contacts_) contacts.push_back(c);
                std::optional<std::int64_t> max_turns;
                if (j.contains("max_turns")) max_turns = j.at("max_turns").get<std::int64_t>();
                formations_.push_back(form_team({config_.agent_name, j.at("goal").get<std::string>(), 0, max_turns,
                                                 std::nullopt},
                                                *policy_, *link_, contacts));
            } catch (const Error& e) {
                record_violation(describe(e) + " during team formation");
            }
        } else if (j.at("op") == wire::kFinish) {
            std::lock_guard inbox(inbox_mu_);
            closed_ = true;
        }
        return;
    }
    try {
        process_frame(message_from_json(j));
    } catch (const Error& e) {
        record_violation(describe(e));
    }
}

void Client::process_frame(const AgentMessage& msg) {
    try {
        handle_incoming(msg);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::StaleSeq && e.code() != ErrorCode::UnknownGroup) throw;
        resync(msg.header.comm_id);
    }
}

void Client::resync(const std::string& comm_id) {
    auto it = groups_.find(comm_id);
    std::uint64_t from = it == groups_.end() ? 0 : it->second.next_seq();
    for (const auto& line : link_->transcript(comm_id, from)) handle_incoming(decode_message(line));
}

void Client::handle_incoming(const AgentMessage& msg) {
    if (!msg.seq) throw Error(ErrorCode::SchemaViolation, "routed frame without seq");
    const auto& id = msg.header.comm_id;
    auto it = groups_.find(id);
    if (it == groups_.end()) {
        const auto& p = msg.payload;
        if (*msg.seq != 0 || p.kind != MessageKind::system_notice || !p.team_members)
            throw Error(ErrorCode::UnknownGroup, id);
        GroupInfo g;
        g.comm_id = id;
        g.goal = p.goal.value_or("");
        g.team_members = *p.team_members;
        g.initiator = p.next_speaker.empty() ? "" : p.next_speaker.front();
        g.team_up_depth = p.team_up_depth.value_or(0);
        g.max_turns = p.max_turns.value_or(0);
        if (auto s = spawned_.find(id); s != spawned_.end()) g.parent_task = s->second;
        it = groups_.emplace(id, std::move(g)).first;
        group_order_.push_back(id);
    }
    auto& g = it->second;
    if (*msg.seq < g.next_seq()) return; // already seen (resync overlap)
    if (*msg.seq > g.next_seq())
        throw Error(ErrorCode::StaleSeq,
                    "expected seq " + std::to_string(g.next_seq()) + ", got " + std::to_string(*msg.seq) + " in " + id);
    apply(g, msg);
}

void Client::apply(GroupInfo& g, const AgentMessage& msg) {
    try {
        g.machine = advance(g.machine, msg);
    } catch (const Error& e) {
        record_violation("mirror rejected seq " + std::to_string(*msg.seq) + ": " + describe(e));
    }
    g.transcript.push_back(msg);
    g.lines.push_back(encode_message(msg));
    persist_group(g);

    const auto& self = config_.agent_name;
    const auto& p = msg.payload;
    if (is_assignment_kind(p.kind) && names(p.next_speaker, self)) on_assignment(g, msg);
    if (p.kind == MessageKind::pause_and_trigger && p.triggers) {
        for (const auto& t : *p.triggers) {
            auto task = tasks_.find(t);
            if (task != tasks_.end() && task->second.assignee == self) {
                task->second.is_trigger = true;
                persist_task(task->second);
            }
        }
    }
    if (p.kind == MessageKind::conclusion) on_conclusion(g, msg);

    if (g.machine.granted() && g.machine.expected_speakers().count(self) &&
        g.machine.state() == ConversationState::discussion)
        act(g);
}

ConversationView Client::view_of(const GroupInfo& g) const {
    return {config_.agent_name, g.comm_id, g.goal, g.machine.state(), g.team_members, g.transcript};
}

std::vector<std::string> Client::resolve_triggers(const GroupInfo& g, const std::vector<std::string>& raw) const {
    std::vector<std::string> out;
    for (const auto& t : raw) {
        auto it = my_async_.find({g.comm_id, t});
        out.push_back(it == my_async_.end() ? t : it->second);
    }
    return out;
}

void Client::act(GroupInfo& g) {
    const auto& self = config_.agent_name;
    if (g.machine.forced()) {
        try {
            conclude_group(g);
        } catch (const Error& e) {
            record_violation(describe(e));
        }
        return;
    }

    UtteranceDecision d;
    try {
        d = policy_->decide_utterance(view_of(g));
    } catch (const Error& e) {
        record_violation(describe(e) + " in group '" + g.goal + "' at turn " + std::to_string(g.machine.turn_count()));
        return;
    }

    if (d.kind == MessageKind::conclusion && d.next_speakers.empty()) {
        try {
            conclude_group(g);
        } catch (const Error& e) {
            record_violation(describe(e));
        }
        return;
    }

    AgentMessage m;
    m.header = {self, HeaderState::communication, g.comm_id};
    m.payload.kind = d.kind;
    if (!d.content.empty() || d.kind == MessageKind::conclusion) m.payload.content = d.content;
    m.payload.next_speaker = d.next_speakers;
    if (d.triggers) m.payload.triggers = resolve_triggers(g, *d.triggers);
    if (is_assignment_kind(d.kind)) m.payload.task_id = make_uuid_v4();

    // Legality firewall: nothing the local machine would reject is sent.
    auto violations = validate_message(m);
    std::string why;
    if (!violations.empty()) {
        why = violations.front().field + ": " + violations.front().rule;
    } else {
        try {
            (void)advance(g.machine, m);
        } catch (const Error& e) {
            why = describe(e);
        }
    }
    if (!why.empty()) {
        record_violation("IllegalDecision in group '" + g.goal + "' at turn " + std::to_string(g.machine.turn_count()) +
                         " (" + why + ")");
        return;
    }

    if (d.kind == MessageKind::async_task_assignment) {
        for (const auto& a : m.payload.next_speaker) my_async_[{g.comm_id, a}] = assignee_task_id(*m.payload.task_id, a);
    }
    try {
        send(m);
    } catch (const Error& e) {
        record_violation(describe(e));
    }
}

TaskRecord Client::extract_task(const GroupInfo& g, const AgentMessage& assignment) {
    const auto& self = config_.agent_name;
    const auto& p = assignment.payload;
    if (!is_assignment_kind(p.kind) || !names(p.next_speaker, self) || !p.task_id)
        throw Error(ErrorCode::ValidationFailed, "assignment does not name " + self);
    auto summary = policy_->summarize_task(view_of(g), assignment);
    if (summary.task_desc.empty()) throw Error(ErrorCode::PolicyFailure, "empty task description");
    TaskRecord t;
    t.task_id = assignee_task_id(*p.task_id, self);
    t.comm_id = g.comm_id;
    t.task_desc = summary.task_desc;
    t.assignee = self;
    t.mode = p.kind == MessageKind::sync_task_assignment ? TaskMode::sync : TaskMode::async;
    t.delegated = summary.delegate;
    return t;
}

void Client::on_assignment(GroupInfo& g, const AgentMessage& msg) {
    TaskRecord task;
    try {
        task = extract_task(g, msg);
    } catch (const Error& e) {
        record_violation(describe(e));
        return;
    }
    if (task.delegated) {
        try {
            std::vector<ContactEntry> contacts;
            for (const auto& [n, c] : contacts_) contacts.push_back(c);
            auto f = spawn_subgroup(config_.agent_name, g.comm_id, g.team_up_depth, task.task_id, task.task_desc,
                                    config_.max_team_up_depth, std::nullopt, *policy_, *link_, contacts);
            spawned_[f.comm_id] = ParentTask{g.comm_id, task.task_id};
            if (auto child = groups_.find(f.comm_id); child != groups_.end())
                child->second.parent_task = spawned_[f.comm_id];
            formations_.push_back(std::move(f));
            task.status = TaskStatus::in_progress;
            tasks_[task.task_id] = task;
            persist_task(task);
            return;
        } catch (const Error& e) {
            // Too deep or rejected: do the work with the integrated agent instead.
            if (e.code() != ErrorCode::DepthExceeded && e.code() != ErrorCode::LaunchRejected) {
                record_violation(describe(e));
                return;
            }
            task.delegated = false;
        }
    }
    start_task(std::move(task));
}

void Client::start_task(TaskRecord task) {
    task.status = TaskStatus::in_progress;
    tasks_[task.task_id] = task;
    persist_task(task);
    std::lock_guard lock(workers_mu_);
    ++running_tasks_;
    workers_.emplace_back([this, task]() mutable {
        auto result = execute_assigned_task(task, agent_.get());
        {
            std::lock_guard state(state_mu_);
            tasks_[task.task_id] = task;
            persist_task(task);
        }
        try {
            send(result);
        } catch (const Error& e) {
            std::lock_guard state(state_mu_);
            record_violation(describe(e) + " while reporting " + task.task_id);
        }
        std::lock_guard done(workers_mu_);
        --running_tasks_;
        workers_cv_.notify_all();
    });
}

AgentMessage Client::execute_assigned_task(TaskRecord& task, IntegratedAgent* agent) {
    if (task.status == TaskStatus::completed) throw Error(ErrorCode::ValidationFailed, "task already completed");
    task.status = TaskStatus::in_progress;

    std::string conclusion;
    if (!agent) {
        conclusion = "ERROR: no integrated agent";
    } else {
        try {
            auto run_id = agent->run(task.task_desc);
            const auto deadline = std::chrono::steady_clock::now() + config_.task_timeout;
            for (;;) {
                auto memory = agent->read_memory(run_id);
                if (!memory.empty() && memory.back().kind == MemoryRecord::Kind::completion) {
                    conclusion = memory.back().text;
                    break;
                }
                if (!memory.empty() && memory.back().kind == MemoryRecord::Kind::failure) {
                    conclusion = "ERROR: " + memory.back().text;
                    break;
                }
                if (std::chrono::steady_clock::now() >= deadline) {
                    conclusion = "ERROR: timed out after " + std::to_string(config_.task_timeout.count()) + " ms";
                    break;
                }
                std::this_thread::sleep_for(config_.poll_interval);
            }
        } catch (const std::exception& e) {
            conclusion = std::string("ERROR: ") + e.what();
        }
    }

    auto result = make_task_result(config_.agent_name, task.comm_id, task.task_id, conclusion);
    task.conclusion = conclusion;
    task.task_abstract = *result.payload.task_abstract;
    task.status = TaskStatus::completed;
    return result;
}

AgentMessage Client::conclude_group(GroupInfo& g) {
    auto content = policy_->conclude(view_of(g));
    if (content.empty()) throw Error(ErrorCode::PolicyFailure, "empty conclusion");
    AgentMessage m;
    m.header = {config_.agent_name, HeaderState::communication, g.comm_id};
    m.payload.kind = MessageKind::conclusion;
    m.payload.content = content;
    (void)advance(g.machine, m); // surfaces GroupConcluded / NotYourTurn before sending
    send(m);
    g.conclusion = content;
    return m;
}

void Client::on_conclusion(GroupInfo& g, const AgentMessage& msg) {
    g.conclusion = msg.payload.content;
    update_contacts(g);
    persist_group(g);

    auto spawned = spawned_.find(g.comm_id);
    if (spawned == spawned_.end() || propagated_.count(g.comm_id)) return;
    propagated_.insert(g.comm_id);
    const auto& parent = spawned->second;
    auto result = make_task_result(config_.agent_name, parent.comm_id, parent.task_id, *msg.payload.content);
    if (auto t = tasks_.find(parent.task_id); t != tasks_.end()) {
        t->second.conclusion = *result.payload.task_conclusion;
        t->second.task_abstract = *result.payload.task_abstract;
        t->second.status = TaskStatus::completed;
        persist_task(t->second);
    }
    try {
        send(result);
    } catch (const Error& e) {
        record_violation(describe(e) + " while reporting to the parent group");
    }
}

std::vector<ContactEntry> Client::update_contacts(const GroupInfo& g) {
    std::vector<ContactEntry> out;
    for (const auto& m : g.team_members) {
        if (m == config_.agent_name) continue;
        auto& entry = contacts_[m];
        entry.agent_name = m;
        if (entry.description.empty() && link_) {
            try {
                entry.description = link_->get_profile(m).agent_description;
            } catch (const Error&) {
            }
        }
        entry.notes = policy_->evaluate_contact(view_of(g), m);
        if (contacts_log_) contacts_log_->append(to_json(entry));
        out.push_back(entry);
    }
    return out;
}

void Client::send(const AgentMessage& msg) {
    std::lock_guard lock(send_mu_);
    link_->send(msg);
}

void Client::persist_task(const TaskRecord& t) {
    if (tasks_log_) tasks_log_->append(to_json(t));
}

void Client::persist_group(const GroupInfo& g) {
    if (!groups_log_) return;
    json j = {{"comm_id", g.comm_id},
              {"goal", g.goal},
              {"team_members", g.team_members},
              {"initiator", g.initiator},
              {"team_up_depth", g.team_up_depth},
              {"max_turns", g.max_turns},
              {"state", to_string(g.machine.state())},
              {"turn_count", g.machine.turn_count()},
              {"next_seq", g.next_seq()}};
    if (g.conclusion) j["conclusion"] = *g.conclusion;
    if (g.parent_task) j["parent_task"] = {{"comm_id", g.parent_task->comm_id}, {"task_id", g.parent_task->task_id}};
    groups_log_->append(j);
}

} // namespace agentnet
