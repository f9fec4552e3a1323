#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <queue>
#include <sstream>
#include <thread>

#include "agentnet/error.hpp"

namespace testsupport {

using namespace agentnet;
using nlohmann::json;

namespace {

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::int64_t uniform(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

std::vector<std::string> distinct_names(Rng& rng, std::size_t lo, std::size_t hi) {
    auto n = static_cast<std::size_t>(uniform(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    std::vector<std::string> out;
    while (out.size() < n) {
        auto s = random_text(rng, 10, false);
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
    return out;
}

std::optional<std::string> maybe_text(Rng& rng, double p = 0.35) {
    if (!chance(rng, p)) return std::nullopt;
    return random_text(rng);
}

} // namespace

// ---- protocol -------------------------------------------------------------

std::string random_text(Rng& rng, std::size_t max_len, bool allow_empty) {
    static const std::vector<std::string> pieces = {
        "\"", "\\", "/", " ", "{", "}", ",", ":", "[", "]", "\n", "\t", "\r", "\b", "\f", "\x01", "\x1f", "\x7f",
        "\xC3\xA9", "\xE2\x9C\x93", "\xF0\x9D\x84\x9E", "\xE2\x80\xA8", "\xE2\x88\x92"};
    static const std::string alnum = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.";
    auto len = static_cast<std::size_t>(uniform(rng, allow_empty ? 0 : 1, static_cast<std::int64_t>(max_len)));
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        if (chance(rng, 0.7)) {
            out.push_back(alnum[static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(alnum.size()) - 1))]);
        } else {
            out += pick(rng, pieces);
        }
    }
    return out;
}

AgentMessage random_valid_message(Rng& rng) {
    AgentMessage m;
    m.header.sender = random_text(rng, 12, false);
    m.header.state = chance(rng, 0.8) ? HeaderState::communication : HeaderState::team_formation;
    m.header.comm_id = m.header.state == HeaderState::communication ? random_text(rng, 36, false) : random_text(rng, 8);

    auto& p = m.payload;
    p.kind = static_cast<MessageKind>(uniform(rng, 0, 6));
    p.goal = maybe_text(rng);
    if (chance(rng, 0.3)) p.team_members = distinct_names(rng, 0, 4);
    if (chance(rng, 0.3)) p.team_up_depth = uniform(rng, 0, INT64_MAX);
    if (chance(rng, 0.3)) p.max_turns = uniform(rng, 1, INT64_MAX);
    p.content = maybe_text(rng, 0.6);
    if (chance(rng, 0.3)) p.task_id = random_text(rng, 40, false);
    p.task_desc = maybe_text(rng, 0.2);
    p.task_conclusion = maybe_text(rng, 0.2);
    p.task_abstract = maybe_text(rng, 0.2);
    if (chance(rng, 0.2)) p.triggers = distinct_names(rng, 0, 3);

    switch (p.kind) {
    case MessageKind::discussion: p.next_speaker = distinct_names(rng, 0, 1); break;
    case MessageKind::sync_task_assignment:
    case MessageKind::async_task_assignment:
        p.next_speaker = distinct_names(rng, 1, 3);
        if (!p.task_id) p.task_id = random_text(rng, 40, false);
        break;
    case MessageKind::pause_and_trigger:
        p.next_speaker = distinct_names(rng, 0, 2);
        p.triggers = distinct_names(rng, 1, 3);
        break;
    case MessageKind::conclusion:
        p.next_speaker.clear();
        p.content = random_text(rng, 24, false);
        break;
    case MessageKind::task_result:
        p.next_speaker = distinct_names(rng, 0, 2);
        if (!p.task_id) p.task_id = random_text(rng, 40, false);
        if (!p.task_conclusion) p.task_conclusion = random_text(rng);
        if (!p.task_abstract) p.task_abstract = random_text(rng);
        break;
    case MessageKind::system_notice: p.next_speaker = distinct_names(rng, 0, 2); break;
    }
    if (chance(rng, 0.5)) m.seq = std::uniform_int_distribution<std::uint64_t>()(rng);
    return m;
}

namespace {

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (unsigned char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (c < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out.push_back(static_cast<char>(c));
            }
        }
    }
    return out + "\"";
}

std::string list(const std::vector<std::string>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + quoted(v[i]);
    return out + "]";
}

std::string object(const std::map<std::string, std::string>& fields) {
    std::string out = "{";
    bool first = true;
    for (const auto& [k, v] : fields) {
        out += (first ? "" : ",") + quoted(k) + ":" + v;
        first = false;
    }
    return out + "}";
}

std::string kind_name(MessageKind k) {
    static const char* names[] = {"discussion", "sync_task_assignment", "async_task_assignment", "pause_and_trigger",
                                  "conclusion", "task_result",          "system_notice"};
    return names[static_cast<int>(k)];
}

} // namespace

std::string canonical_frame(const AgentMessage& m) {
    std::map<std::string, std::string> header = {
        {"sender", quoted(m.header.sender)},
        {"state", quoted(m.header.state == HeaderState::communication ? "communication" : "team_formation")},
        {"comm_id", quoted(m.header.comm_id)},
    };
    const auto& p = m.payload;
    std::map<std::string, std::string> payload = {{"kind", quoted(kind_name(p.kind))}, {"next_speaker", list(p.next_speaker)}};
    if (p.goal) payload["goal"] = quoted(*p.goal);
    if (p.team_members) payload["team_members"] = list(*p.team_members);
    if (p.team_up_depth) payload["team_up_depth"] = std::to_string(*p.team_up_depth);
    if (p.max_turns) payload["max_turns"] = std::to_string(*p.max_turns);
    if (p.content) payload["content"] = quoted(*p.content);
    if (p.task_id) payload["task_id"] = quoted(*p.task_id);
    if (p.task_desc) payload["task_desc"] = quoted(*p.task_desc);
    if (p.task_conclusion) payload["task_conclusion"] = quoted(*p.task_conclusion);
    if (p.task_abstract) payload["task_abstract"] = quoted(*p.task_abstract);
    if (p.triggers) payload["triggers"] = list(*p.triggers);
    std::map<std::string, std::string> top = {{"header", object(header)}, {"payload", object(payload)}};
    if (m.seq) top["seq"] = std::to_string(*m.seq);
    return object(top) + "\n";
}

std::string mutate_frame(Rng& rng, const AgentMessage& base, std::string& label) {
    const std::string frame = canonical_frame(base);
    const std::string body = frame.substr(0, frame.size() - 1);
    json j = json::parse(body);
    auto& h = j["header"];
    auto& p = j["payload"];
    auto dump = [](const json& x) { return x.dump() + "\n"; };

    switch (uniform(rng, 0, 19)) {
    case 0: label = "no_newline"; return body;
    case 1: label = "truncated"; return body.substr(0, static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(body.size()) - 1))) + "\n";
    case 2: {
        label = "missing_key";
        switch (uniform(rng, 0, 6)) {
        case 0: j.erase("header"); break;
        case 1: j.erase("payload"); break;
        case 2: h.erase("sender"); break;
        case 3: h.erase("state"); break;
        case 4: h.erase("comm_id"); break;
        case 5: p.erase("kind"); break;
        default: p.erase("next_speaker"); break;
        }
        return dump(j);
    }
    case 3: {
        label = "unknown_key";
        switch (uniform(rng, 0, 2)) {
        case 0: j["extra"] = 1; break;
        case 1: h["group_id"] = "g"; break;
        default: p["priority"] = "high"; break;
        }
        return dump(j);
    }
    case 4: {
        label = "wrong_type";
        switch (uniform(rng, 0, 13)) {
        case 0: h["sender"] = 42; break;
        case 1: h["state"] = true; break;
        case 2: h["comm_id"] = nullptr; break;
        case 3: p["kind"] = 3; break;
        case 4: p["next_speaker"] = "B"; break;
        case 5: p["next_speaker"] = json::array({1}); break;
        case 6: p["content"] = json::array(); break;
        case 7: p["goal"] = 1; break;
        case 8: p["team_up_depth"] = "2"; break;
        case 9: p["max_turns"] = 1.5; break;
        case 10: j["seq"] = -3; break;
        case 11: j["seq"] = "1"; break;
        case 12: j["header"] = json::array(); break;
        default: j["payload"] = "x"; break;
        }
        return dump(j);
    }
    case 5: label = "unknown_kind"; p["kind"] = "task assignment"; return dump(j);
    case 6: label = "unknown_state"; h["state"] = "idle"; return dump(j);
    case 7: {
        label = "kind_rule";
        switch (uniform(rng, 0, 8)) {
        case 0: p["kind"] = "discussion"; p["next_speaker"] = {"x", "y"}; break;
        case 1: p["kind"] = "sync_task_assignment"; p["next_speaker"] = json::array(); p["task_id"] = "t"; break;
        case 2: p["kind"] = "async_task_assignment"; p["next_speaker"] = {"x"}; p.erase("task_id"); break;
        case 3: p["kind"] = "pause_and_trigger"; p.erase("triggers"); break;
        case 4: p["kind"] = "pause_and_trigger"; p["triggers"] = json::array(); break;
        case 5: p["kind"] = "conclusion"; p["content"] = "c"; p["next_speaker"] = {"x"}; break;
        case 6: p["kind"] = "conclusion"; p["next_speaker"] = json::array(); p.erase("content"); break;
        case 7: p["kind"] = "conclusion"; p["next_speaker"] = json::array(); p["content"] = ""; break;
        default: {
            p["kind"] = "task_result";
            p["task_id"] = "t";
            p["task_conclusion"] = "r";
            p["task_abstract"] = "r";
            static const char* keys[] = {"task_id", "task_conclusion", "task_abstract"};
            p.erase(keys[uniform(rng, 0, 2)]);
        }
        }
        return dump(j);
    }
    case 8: label = "empty_sender"; h["sender"] = ""; return dump(j);
    case 9: label = "empty_comm_id"; h["state"] = "communication"; h["comm_id"] = ""; return dump(j);
    case 10:
        label = "duplicate_names";
        if (chance(rng, 0.5)) {
            p["kind"] = "sync_task_assignment";
            p["task_id"] = "t";
            p["next_speaker"] = {"x", "x"};
        } else {
            p["team_members"] = {"a", "b", "a"};
        }
        return dump(j);
    case 11:
        label = "out_of_range";
        switch (uniform(rng, 0, 2)) {
        case 0: p["team_up_depth"] = -1; break;
        case 1: p["max_turns"] = 0; break;
        default: p["max_turns"] = -5; break;
        }
        return dump(j);
    case 12: {
        label = "invalid_utf8";
        p["content"] = "@@BAD@@";
        auto s = dump(j);
        static const char* bad[] = {"\xC3\x28", "\xFF", "\xE2\x82", "\xED\xA0\x80", "\xC0\xAF"};
        s.replace(s.find("@@BAD@@"), 7, bad[uniform(rng, 0, 4)]);
        return s;
    }
    case 13: {
        label = "duplicate_key";
        auto s = dump(j);
        auto at = s.find("\"header\":{");
        s.insert(at + 10, "\"sender\":\"dup\",");
        return s;
    }
    case 14: {
        label = "not_object";
        static const char* shapes[] = {"[]\n", "42\n", "\"frame\"\n", "null\n", "", "\n", "{}\n"};
        return shapes[uniform(rng, 0, 6)];
    }
    case 15: label = "embedded_newline"; return "{\n" + body.substr(1) + "\n";
    case 16:
        label = "empty_list_entry";
        p["kind"] = "async_task_assignment";
        p["task_id"] = "t";
        p["next_speaker"] = {""};
        return dump(j);
    case 17: label = "trailing_garbage"; return body + (chance(rng, 0.5) ? "x\n" : "}\n");
    case 18: {
        label = "null_optional";
        static const char* keys[] = {"goal", "content", "task_id", "triggers", "team_members", "max_turns"};
        p[keys[uniform(rng, 0, 5)]] = nullptr;
        return dump(j);
    }
    default: label = "empty_task_id"; p["task_id"] = ""; return dump(j);
    }
}

// ---- conversation state machine -----------------------------------------

namespace {

using S = ConversationState;

std::string id_of(const std::string& assignment, const std::string& assignee) { return assignment + "/" + assignee; }

/// Everything derivable from a legal prefix, recomputed from the first frame.
struct Derivation {
    OracleState s;
    std::vector<std::string> members;
    std::int64_t max_turns = 20;
    std::map<std::string, std::string> owner; // every assigned id
    std::set<std::string> async_ever;
    bool concluded = false;
};

bool member_of(const std::vector<std::string>& members, const std::string& n) {
    return std::find(members.begin(), members.end(), n) != members.end();
}

Derivation derive(const std::vector<AgentMessage>& prefix, std::int64_t default_max_turns) {
    Derivation d;
    d.max_turns = default_max_turns;
    if (prefix.empty()) return d;
    const auto& first = prefix.front().payload;
    if (first.team_members) d.members = *first.team_members;
    if (first.max_turns) d.max_turns = *first.max_turns;

    std::map<std::string, std::size_t> result_at; // task id -> index of its result
    std::set<std::string> sync_ids;
    std::optional<std::size_t> last_conv;
    std::optional<std::size_t> last_floor_notice;
    std::int64_t conv_seen = 0;
    bool forced_seen = false;

    for (std::size_t i = 0; i < prefix.size(); ++i) {
        const auto& m = prefix[i];
        const auto& p = m.payload;
        if (p.kind == MessageKind::system_notice) {
            if (!p.next_speaker.empty()) {
                last_floor_notice = i;
                if (conv_seen >= d.max_turns) forced_seen = true;
            }
            continue;
        }
        if (p.kind == MessageKind::task_result) {
            result_at.emplace(*p.task_id, i);
            continue;
        }
        ++conv_seen;
        last_conv = i;
        if (p.kind == MessageKind::conclusion) d.concluded = true;
        if (p.kind == MessageKind::sync_task_assignment || p.kind == MessageKind::async_task_assignment) {
            for (const auto& a : p.next_speaker) {
                auto id = id_of(*p.task_id, a);
                d.owner[id] = a;
                if (p.kind == MessageKind::sync_task_assignment) {
                    sync_ids.insert(id);
                } else {
                    d.async_ever.insert(id);
                }
            }
        }
    }

    auto& s = d.s;
    s.turn_count = conv_seen;
    for (const auto& id : sync_ids)
        if (!result_at.count(id)) s.open_sync.insert(id);
    for (const auto& id : d.async_ever)
        if (!result_at.count(id)) s.open_async.insert(id);

    // When the last conversation frame gated the chat, find where it was released.
    std::optional<std::size_t> release_at;
    std::set<std::string> remaining;
    s.state = S::discussion;
    if (d.concluded) {
        s.state = S::conclusion;
    } else if (last_conv) {
        const auto& L = prefix[*last_conv];
        const auto& p = L.payload;
        if (p.kind == MessageKind::sync_task_assignment) {
            std::size_t latest = 0;
            bool all_done = true;
            for (const auto& a : p.next_speaker) {
                auto r = result_at.find(id_of(*p.task_id, a));
                if (r == result_at.end()) {
                    all_done = false;
                } else {
                    latest = std::max(latest, r->second);
                }
            }
            if (all_done) {
                release_at = latest;
            } else {
                s.state = S::sync_assignment;
            }
        } else if (p.kind == MessageKind::pause_and_trigger) {
            std::set<std::string> waiting; // open when the pause was posted
            for (const auto& t : *p.triggers) {
                auto r = result_at.find(t);
                if (r == result_at.end() || r->second > *last_conv) waiting.insert(t);
            }
            std::size_t latest = *last_conv;
            for (const auto& t : waiting) {
                auto r = result_at.find(t);
                if (r == result_at.end()) {
                    remaining.insert(t);
                } else {
                    latest = std::max(latest, r->second);
                }
            }
            if (remaining.empty()) {
                release_at = latest;
            } else {
                s.state = S::pause_trigger;
                s.open_triggers = remaining;
            }
        }
    }

    // The floor belongs to whichever of the last notice, the last
    // conversation frame or the release came latest.
    auto notice_wins = [&] {
        if (!last_floor_notice) return false;
        if (last_conv && *last_conv > *last_floor_notice) return false;
        if (release_at && *release_at > *last_floor_notice) return false;
        return true;
    };
    if (notice_wins()) {
        const auto& n = prefix[*last_floor_notice].payload.next_speaker;
        s.floor = {n.begin(), n.end()};
    } else if (release_at && last_conv && *release_at >= *last_conv) {
        s.floor = {prefix[*last_conv].header.sender};
    } else if (last_conv) {
        const auto& L = prefix[*last_conv];
        switch (L.payload.kind) {
        case MessageKind::discussion:
            if (L.payload.next_speaker.empty()) {
                s.floor = {L.header.sender};
            } else {
                s.floor = {L.payload.next_speaker.front()};
            }
            break;
        case MessageKind::async_task_assignment: s.floor = {L.header.sender}; break;
        default: break;
        }
    }

    const bool awaiting = s.state == S::discussion && s.turn_count >= d.max_turns && !forced_seen;
    s.forced = forced_seen && s.state == S::discussion;
    const auto& F = prefix.back();
    const auto fi = prefix.size() - 1;
    switch (F.payload.kind) {
    case MessageKind::system_notice: s.granted = !F.payload.next_speaker.empty(); break;
    case MessageKind::task_result: s.granted = release_at && *release_at == fi && !awaiting; break;
    default: s.granted = s.state == S::discussion && !awaiting; break;
    }
    s.quiescent = d.concluded && s.open_sync.empty() && s.open_async.empty() && s.open_triggers.empty();
    return d;
}

bool legal_after(const Derivation& d, const AgentMessage& n) {
    const auto& p = n.payload;
    const auto& s = d.s;
    if (p.kind == MessageKind::system_notice) {
        if (n.header.sender != "@server" || d.concluded) return false;
        if (p.next_speaker.empty()) return true;
        if (s.state != S::discussion) return false;
        return std::all_of(p.next_speaker.begin(), p.next_speaker.end(),
                           [&](const auto& x) { return member_of(d.members, x); });
    }
    if (!member_of(d.members, n.header.sender)) return false;
    if (p.kind == MessageKind::task_result) {
        const auto& id = *p.task_id;
        if (!s.open_sync.count(id) && !s.open_async.count(id)) return false;
        return d.owner.at(id) == n.header.sender;
    }
    if (d.concluded || s.state != S::discussion) return false;
    if (!s.floor.count(n.header.sender)) return false;
    if (s.turn_count >= d.max_turns && p.kind != MessageKind::conclusion) return false;
    for (const auto& x : p.next_speaker)
        if (!member_of(d.members, x)) return false;
    if (p.kind == MessageKind::sync_task_assignment || p.kind == MessageKind::async_task_assignment) {
        for (const auto& a : p.next_speaker)
            if (d.owner.count(id_of(*p.task_id, a))) return false;
    }
    if (p.kind == MessageKind::pause_and_trigger) {
        for (const auto& t : *p.triggers)
            if (!d.async_ever.count(t)) return false;
    }
    return true;
}

AgentMessage frame(const std::string& sender, MessageKind kind, std::vector<std::string> next = {}) {
    AgentMessage m;
    m.header = {sender, HeaderState::communication, "g"};
    m.payload.kind = kind;
    m.payload.next_speaker = std::move(next);
    m.payload.content = "c";
    return m;
}

} // namespace

OracleState oracle_state(const std::vector<AgentMessage>& prefix, std::int64_t default_max_turns) {
    return derive(prefix, default_max_turns).s;
}

bool oracle_legal(const std::vector<AgentMessage>& prefix, const AgentMessage& next, std::int64_t default_max_turns) {
    return legal_after(derive(prefix, default_max_turns), next);
}

std::vector<bool> oracle_legal_all(const std::vector<AgentMessage>& prefix, const std::vector<AgentMessage>& candidates,
                                   std::int64_t default_max_turns) {
    const auto d = derive(prefix, default_max_turns);
    std::vector<bool> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(legal_after(d, c));
    return out;
}

AgentMessage setup_notice(const std::string& comm_id, const std::vector<std::string>& members, std::int64_t max_turns) {
    AgentMessage m;
    m.header = {"@server", HeaderState::communication, comm_id};
    m.payload.kind = MessageKind::system_notice;
    m.payload.goal = "goal";
    m.payload.team_members = members;
    m.payload.team_up_depth = 0;
    m.payload.max_turns = max_turns;
    m.payload.content = "formed";
    m.payload.next_speaker = {members.front()};
    return m;
}

std::vector<AgentMessage> candidate_frames(Rng& rng, const std::vector<AgentMessage>& prefix, std::uint64_t& id_counter) {
    const auto d = derive(prefix, 20);
    std::vector<std::string> senders = d.members;
    senders.push_back("Z");
    std::vector<std::string> targets = senders;
    std::vector<std::string> assignments; // assignment ids already used
    for (const auto& m : prefix) {
        if (is_assignment_kind(m.payload.kind)) assignments.push_back(*m.payload.task_id);
    }
    std::vector<std::string> sync_ids;
    for (const auto& [id, _] : d.owner)
        if (!d.async_ever.count(id)) sync_ids.push_back(id);

    auto subset = [&](const std::vector<std::string>& pool, std::size_t max_n) {
        std::vector<std::string> v = pool;
        std::shuffle(v.begin(), v.end(), rng);
        v.resize(static_cast<std::size_t>(uniform(rng, 1, static_cast<std::int64_t>(std::min(max_n, v.size())))));
        return v;
    };

    std::vector<AgentMessage> out;
    for (const auto& s : senders) {
        out.push_back(frame(s, MessageKind::discussion));
        for (const auto& t : targets) out.push_back(frame(s, MessageKind::discussion, {t}));
        for (auto kind : {MessageKind::sync_task_assignment, MessageKind::async_task_assignment}) {
            auto m = frame(s, kind, subset(d.members, 2));
            m.payload.task_id = "t" + std::to_string(++id_counter);
            out.push_back(m);
            auto stray = frame(s, kind, {"Z"});
            stray.payload.task_id = "t" + std::to_string(++id_counter);
            out.push_back(stray);
            if (!assignments.empty()) {
                auto reuse = frame(s, kind, d.members);
                reuse.payload.task_id = pick(rng, assignments);
                out.push_back(reuse);
            }
        }
        if (!d.async_ever.empty()) {
            auto m = frame(s, MessageKind::pause_and_trigger);
            m.payload.triggers = subset({d.async_ever.begin(), d.async_ever.end()}, 3);
            out.push_back(m);
        }
        auto unknown = frame(s, MessageKind::pause_and_trigger);
        unknown.payload.triggers = std::vector<std::string>{"nope/" + s};
        out.push_back(unknown);
        if (!sync_ids.empty()) {
            auto wrong = frame(s, MessageKind::pause_and_trigger);
            wrong.payload.triggers = std::vector<std::string>{pick(rng, sync_ids)};
            out.push_back(wrong);
        }
        out.push_back(frame(s, MessageKind::conclusion));
        for (const auto& [id, _] : d.owner) out.push_back(make_task_result(s, "g", id, "r"));
        out.push_back(make_task_result(s, "g", "missing/" + s, "r"));
    }
    auto plain = setup_notice("g", d.members, d.max_turns);
    plain.payload.team_members.reset();
    plain.payload.max_turns.reset();
    plain.payload.next_speaker.clear();
    out.push_back(plain);
    for (const auto& t : targets) {
        auto n = plain;
        n.payload.next_speaker = {t};
        out.push_back(n);
    }
    auto spoof = plain;
    spoof.header.sender = d.members.front();
    spoof.payload.next_speaker = {d.members.front()};
    out.push_back(spoof);
    return out;
}

namespace {

std::string join(const std::set<std::string>& s) {
    std::string out = "{";
    for (const auto& x : s) out += (out.size() > 1 ? "," : "") + x;
    return out + "}";
}

std::set<std::string> keys(const std::map<std::string, std::string>& m) {
    std::set<std::string> out;
    for (const auto& [k, _] : m) out.insert(k);
    return out;
}

} // namespace

std::string describe_oracle(const OracleState& s) {
    std::ostringstream os;
    os << "state=" << to_string(s.state) << " turns=" << s.turn_count << " floor=" << join(s.floor)
       << " sync=" << join(s.open_sync) << " async=" << join(s.open_async) << " triggers=" << join(s.open_triggers)
       << " granted=" << s.granted << " forced=" << s.forced << " quiescent=" << s.quiescent;
    return os.str();
}

std::string describe_machine(const ChatMachine& m) {
    OracleState s;
    s.state = m.state();
    s.turn_count = m.turn_count();
    s.floor = m.expected_speakers();
    s.open_sync = keys(m.open_sync_tasks());
    s.open_async = keys(m.open_async_tasks());
    s.open_triggers = m.open_triggers();
    s.granted = m.granted();
    s.forced = m.forced();
    s.quiescent = is_quiescent(m);
    return describe_oracle(s);
}

std::string compare(const ChatMachine& m, const OracleState& s) {
    const bool same = m.state() == s.state && m.turn_count() == s.turn_count && m.expected_speakers() == s.floor &&
                      keys(m.open_sync_tasks()) == s.open_sync && keys(m.open_async_tasks()) == s.open_async &&
                      m.open_triggers() == s.open_triggers && m.granted() == s.granted && m.forced() == s.forced &&
                      is_quiescent(m) == s.quiescent;
    if (same) return {};
    return "machine " + describe_machine(m) + " vs oracle " + describe_oracle(s);
}

// ---- routing ----------------------------------------------------------------

void RecordingChannel::push(std::string_view line) {
    std::lock_guard lock(mu_);
    lines_.emplace_back(line);
}

std::vector<std::string> RecordingChannel::lines() const {
    std::lock_guard lock(mu_);
    return lines_;
}

RoutingTrial run_routing_trial(std::uint64_t seed, std::size_t n_clients, std::size_t n_groups, std::size_t min_frames) {
    RoutingTrial trial;
    trial.clients = n_clients;
    trial.groups = n_groups;
    Rng rng(seed);

    ServerConfig cfg;
    cfg.default_max_turns = 1000000;
    Hub hub(cfg);
    std::vector<std::string> names;
    std::map<std::string, std::shared_ptr<RecordingChannel>> channels;
    for (std::size_t i = 0; i < n_clients; ++i) {
        names.push_back("C" + std::to_string(i));
        hub.registry().register_agent({names.back(), "Thing Assistant", "client number " + std::to_string(i)});
        channels[names.back()] = std::make_shared<RecordingChannel>();
        hub.connect(names.back(), cfg.auth_token, channels[names.back()]);
    }

    // Overlapping groups: each shares at least one member with the previous one.
    std::vector<std::string> comm_ids;
    std::map<std::string, std::vector<std::string>> members_of;
    std::vector<std::string> previous;
    for (std::size_t g = 0; g < n_groups; ++g) {
        std::vector<std::string> pool = names;
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(static_cast<std::size_t>(uniform(rng, 2, std::min<std::int64_t>(4, static_cast<std::int64_t>(n_clients)))));
        if (!previous.empty() && std::find_first_of(pool.begin(), pool.end(), previous.begin(), previous.end()) == pool.end())
            pool.back() = pick(rng, previous);
        GroupSpec spec{pool.front(), pool, "goal " + std::to_string(g), 0, std::nullopt, std::nullopt};
        auto id = hub.setup_group(spec);
        comm_ids.push_back(id);
        members_of[id] = hub.group(id)->team_members;
        previous = members_of[id];
    }

    std::mutex fail_mu;
    auto fail = [&](const std::string& what) {
        std::lock_guard lock(fail_mu);
        if (trial.failures.size() < 20) trial.failures.push_back(what);
    };
    const std::size_t quota = min_frames / n_groups + 1;

    auto drive = [&](std::size_t gi, std::uint64_t driver_seed) {
        Rng r(driver_seed);
        const auto& id = comm_ids[gi];
        const auto& members = members_of.at(id);
        const std::set<std::string> member_set(members.begin(), members.end());
        std::uint64_t expected_seq = 1; // the setup notice took seq 0
        std::map<std::string, std::string> open_async;
        std::uint64_t counter = 0;

        auto send = [&](const AgentMessage& m) {
            try {
                auto report = hub.route(m);
                std::set<std::string> got(report.delivered.begin(), report.delivered.end());
                if (got != member_set || got.size() != report.delivered.size() || !report.deferred.empty())
                    fail("delivery set mismatch in group " + std::to_string(gi) + " at seq " + std::to_string(report.seq));
                if (report.seq != expected_seq)
                    fail("seq " + std::to_string(report.seq) + " where " + std::to_string(expected_seq) + " was expected");
                ++expected_seq;
            } catch (const Error& e) {
                fail(std::string("route rejected a legal frame: ") + e.what());
            }
        };

        while (expected_seq < quota) {
            auto rec = hub.group(id);
            const auto& floor = rec->expected_speakers();
            if (!open_async.empty() && chance(r, 0.25)) {
                auto it = open_async.begin();
                std::advance(it, uniform(r, 0, static_cast<std::int64_t>(open_async.size()) - 1));
                send(make_task_result(it->second, id, it->first, "result " + it->first));
                open_async.erase(it);
                continue;
            }
            const auto speaker = *floor.begin();
            double roll = std::uniform_real_distribution<double>(0, 1)(r);
            if (roll < 0.7) {
                send(make_discussion(speaker, id, "msg " + std::to_string(expected_seq), {pick(r, members)}));
            } else if (roll < 0.85) {
                auto m = make_discussion(speaker, id, "async job", {pick(r, members)});
                m.payload.kind = MessageKind::async_task_assignment;
                m.payload.task_id = "a" + std::to_string(++counter);
                send(m);
                open_async[*m.payload.task_id + "/" + m.payload.next_speaker.front()] = m.payload.next_speaker.front();
            } else {
                auto m = make_discussion(speaker, id, "sync job", {pick(r, members)});
                m.payload.kind = MessageKind::sync_task_assignment;
                m.payload.task_id = "s" + std::to_string(++counter);
                send(m);
                const auto& who = m.payload.next_speaker.front();
                send(make_task_result(who, id, *m.payload.task_id + "/" + who, "done"));
            }
        }
        for (const auto& [task, who] : open_async) send(make_task_result(who, id, task, "late result"));
        auto rec = hub.group(id);
        AgentMessage end;
        end.header = {*rec->expected_speakers().begin(), HeaderState::communication, id};
        end.payload.kind = MessageKind::conclusion;
        end.payload.content = "finished";
        send(end);
    };

    std::vector<std::thread> drivers;
    for (std::size_t g = 0; g < n_groups; ++g) drivers.emplace_back(drive, g, rng());
    for (auto& t : drivers) t.join();

    trial.frames = hub.total_frames();
    if (trial.frames < min_frames)
        fail("only " + std::to_string(trial.frames) + " frames routed, wanted " + std::to_string(min_frames));
    if (!hub.all_quiescent()) fail("not every group ended quiescent");

    for (const auto& [name, channel] : channels) {
        std::map<std::string, std::vector<std::string>> received;
        for (const auto& line : channel->lines()) {
            auto msg = decode_message(line);
            received[msg.header.comm_id].push_back(line);
        }
        for (const auto& id : comm_ids) {
            const auto& ms = members_of.at(id);
            const bool member = std::find(ms.begin(), ms.end(), name) != ms.end();
            auto it = received.find(id);
            if (!member) {
                if (it != received.end()) fail("isolation leak: " + name + " received frames of a foreign group");
                continue;
            }
            if (it == received.end()) {
                fail(name + " received nothing for one of its groups");
                continue;
            }
            for (std::size_t i = 0; i < it->second.size(); ++i) {
                if (decode_message(it->second[i]).seq != i) {
                    fail(name + " saw a seq gap or reorder at position " + std::to_string(i));
                    break;
                }
            }
            if (it->second != hub.transcript(id)) fail(name + "'s copy differs from the server transcript");
        }
        for (const auto& [id, _] : received) {
            if (!members_of.count(id)) fail(name + " received a frame for an unknown group");
        }
    }
    return trial;
}

// ---- registry ---------------------------------------------------------------

std::map<std::string, int> oracle_tokens(const std::string& text) {
    std::map<std::string, int> out;
    std::string cur;
    for (char ch : text + " ") {
        bool keep = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || (ch >= 'A' && ch <= 'Z');
        if (keep) {
            cur.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
        } else if (!cur.empty()) {
            ++out[cur];
            cur.clear();
        }
    }
    return out;
}

std::vector<std::pair<std::string, double>> oracle_search(const std::vector<AgentProfile>& corpus,
                                                          const std::vector<std::string>& characteristics,
                                                          std::size_t limit) {
    std::vector<std::map<std::string, int>> docs;
    for (const auto& p : corpus)
        docs.push_back(oracle_tokens(p.agent_name + " " + p.agent_type + " " + p.agent_description));
    std::vector<std::map<std::string, int>> queries;
    for (const auto& c : characteristics) queries.push_back(oracle_tokens(c));

    std::vector<std::string> vocab;
    for (const auto& d : docs)
        for (const auto& [t, _] : d) vocab.push_back(t);
    for (const auto& q : queries)
        for (const auto& [t, _] : q) vocab.push_back(t);
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());

    const double n = static_cast<double>(corpus.size());
    std::vector<double> idf;
    for (const auto& t : vocab) {
        double df = 0;
        for (const auto& d : docs) df += d.count(t) ? 1 : 0;
        idf.push_back(std::log((n + 1) / (df + 1)) + 1);
    }
    auto vec = [&](const std::map<std::string, int>& bag) {
        std::vector<double> v(vocab.size(), 0.0);
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            auto it = bag.find(vocab[i]);
            if (it != bag.end()) v[i] = it->second * idf[i];
        }
        return v;
    };
    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return dot == 0 ? 0.0 : dot / (std::sqrt(na) * std::sqrt(nb));
    };

    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto dv = vec(docs[i]);
        double total = 0;
        for (const auto& q : queries) total += cosine(vec(q), dv);
        if (total > 0) out.emplace_back(corpus[i].agent_name, total);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (out.size() > limit) out.resize(limit);
    return out;
}

// ---- teaming ----------------------------------------------------------------

std::uint64_t pair_count(const std::set<std::string>& members) {
    std::vector<std::string> v(members.begin(), members.end());
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) ++n;
    return n;
}

std::uint64_t oracle_edges_nested(const TeamTree& t) {
    std::uint64_t n = pair_count({t.members.begin(), t.members.end()});
    for (const auto& c : t.children) n += oracle_edges_nested(c);
    return n;
}

namespace {

void collect(const TeamTree& t, std::set<std::string>& out) {
    out.insert(t.members.begin(), t.members.end());
    for (const auto& c : t.children) collect(c, out);
}

} // namespace

std::uint64_t oracle_edges_flat(const TeamTree& t) {
    std::set<std::string> all;
    collect(t, all);
    return pair_count(all);
}

TeamTree random_tree(Rng& rng, int max_depth) {
    static const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
    int counter = 0;
    std::function<TeamTree(int)> build = [&](int depth) {
        TeamTree t;
        t.comm_id = "g" + std::to_string(counter++);
        t.depth = depth;
        auto v = pool;
        std::shuffle(v.begin(), v.end(), rng);
        v.resize(static_cast<std::size_t>(uniform(rng, 1, 6)));
        t.members = v;
        if (depth < max_depth) {
            auto kids = uniform(rng, 0, 3);
            for (int i = 0; i < kids; ++i) t.children.push_back(build(depth + 1));
        }
        return t;
    };
    return build(0);
}

TeamTree random_initiator_tree(Rng& rng, int max_depth) {
    int counter = 0;
    int fresh = 0;
    auto new_name = [&] { return "m" + std::to_string(fresh++); };
    std::function<TeamTree(int, const std::string&)> build = [&](int depth, const std::string& initiator) {
        TeamTree t;
        t.comm_id = "g" + std::to_string(counter++);
        t.depth = depth;
        if (depth == 0) {
            auto n = uniform(rng, 1, 5);
            for (int i = 0; i < n; ++i) t.members.push_back(new_name());
        } else {
            t.members.push_back(initiator);
            auto k = uniform(rng, 1, 4);
            for (int i = 0; i < k; ++i) t.members.push_back(new_name());
        }
        if (depth < max_depth) {
            auto kids = uniform(rng, 0, 3);
            for (int i = 0; i < kids; ++i) t.children.push_back(build(depth + 1, pick(rng, t.members)));
        }
        return t;
    };
    return build(0, "");
}

std::uint64_t predicted_gap(const TeamTree& t) {
    std::set<std::string> seen(t.members.begin(), t.members.end());
    std::uint64_t gap = 0;
    std::queue<const TeamTree*> q;
    for (const auto& c : t.children) q.push(&c);
    while (!q.empty()) {
        const auto* node = q.front();
        q.pop();
        std::uint64_t k = 0;
        for (const auto& m : node->members) k += seen.count(m) ? 0 : 1;
        gap += k * (seen.size() - 1);
        seen.insert(node->members.begin(), node->members.end());
        for (const auto& c : node->children) q.push(&c);
    }
    return gap;
}

// ---- scenarios -----------------------------------------------------------------

namespace {

json profile(const std::string& name, const std::string& type, const std::string& desc) {
    return {{"agent_name", name}, {"agent_type", type}, {"agent_description", desc}};
}

} // namespace

json random_trigger_scenario(Rng& rng, int index) {
    const std::string goal = "Trigger run " + std::to_string(index);
    const auto w = static_cast<std::size_t>(uniform(rng, 1, 3));
    std::vector<std::string> workers;
    json agents = json::array();
    std::map<std::string, json> worker_scripts;
    std::map<std::string, std::string> kind_of;
    static const std::vector<std::string> kinds = {"echo", "echo", "echo", "arith", "fail", "none"};
    for (std::size_t i = 0; i < w; ++i) {
        workers.push_back("W" + std::to_string(i + 1));
        worker_scripts[workers.back()] = json::array();
        kind_of[workers.back()] = pick(rng, kinds);
    }

    json lead = json::array();
    auto rec = [&](json r) {
        r["goal"] = goal;
        return r;
    };
    lead.push_back(rec({{"action", "search"}, {"characteristics", {"parallel worker"}}}));
    lead.push_back(rec({{"action", "launch"}, {"members", workers}}));

    auto detour = [&] {
        const auto& who = pick(rng, workers);
        lead.push_back(rec({{"action", "utter"}, {"kind", "discussion"}, {"content", "status, " + who + "?"},
                            {"next_speakers", {who}}}));
        worker_scripts[who].push_back(rec({{"action", "utter"}, {"kind", "discussion"}, {"content", "still on it"},
                                           {"next_speakers", {"Lead"}}}));
    };

    auto order = workers;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t at = 0;
    while (at < order.size()) {
        auto chunk = static_cast<std::size_t>(uniform(rng, 1, static_cast<std::int64_t>(order.size() - at)));
        std::vector<std::string> names(order.begin() + static_cast<std::ptrdiff_t>(at),
                                       order.begin() + static_cast<std::ptrdiff_t>(at + chunk));
        at += chunk;
        auto content = "compute " + std::to_string(uniform(rng, 1, 9)) + "*" + std::to_string(uniform(rng, 1, 9));
        lead.push_back(rec({{"action", "utter"}, {"kind", "async_task_assignment"}, {"content", content},
                            {"next_speakers", names}}));
        if (chance(rng, 0.3)) detour();
    }
    auto triggers = workers;
    std::shuffle(triggers.begin(), triggers.end(), rng);
    triggers.resize(static_cast<std::size_t>(uniform(rng, 1, static_cast<std::int64_t>(triggers.size()))));
    lead.push_back(rec({{"action", "utter"}, {"kind", "pause_and_trigger"}, {"content", "waiting for results"},
                        {"triggers", triggers}}));
    if (chance(rng, 0.4)) detour();
    const std::string done = "All triggered work reported.";
    lead.push_back(rec({{"action", "utter"}, {"kind", "conclusion"}, {"content", done}}));

    agents.push_back({{"profile", profile("Lead", "Human Assistant", "Planner who splits work")},
                      {"integrated_agent", "none"},
                      {"script", lead}});
    for (const auto& name : workers) {
        agents.push_back({{"profile", profile(name, "Thing Assistant", "parallel worker for background jobs")},
                          {"integrated_agent", kind_of[name]},
                          {"latency_ms", uniform(rng, 0, 60)},
                          {"script", worker_scripts[name]}});
    }
    return {
        {"name", "trigger_" + std::to_string(index)},
        {"agents", agents},
        {"task", {{"goal", goal}, {"initiator", "Lead"}, {"max_turns", 20}}},
        {"expectations",
         {{"final_conclusion", done},
          {"metric_bounds",
           {{"async_tasks", static_cast<double>(w)}, {"triggers_fired", static_cast<double>(triggers.size())}}}}},
    };
}

json ping_pong_scenario(std::int64_t k, int extra_records) {
    const std::string goal = "Ping pong to " + std::to_string(k);
    json alice = json::array({{{"goal", goal}, {"action", "launch"}, {"members", {"Bob"}}}});
    json bob = json::array();
    for (std::int64_t i = 0; i < k + extra_records; ++i) {
        alice.push_back({{"goal", goal}, {"action", "utter"}, {"kind", "discussion"}, {"content", "ping " + std::to_string(i)},
                         {"next_speakers", {"Bob"}}});
        bob.push_back({{"goal", goal}, {"action", "utter"}, {"kind", "discussion"}, {"content", "pong " + std::to_string(i)},
                       {"next_speakers", {"Alice"}}});
    }
    return {
        {"name", "ping_pong_" + std::to_string(k)},
        {"agents",
         {{{"profile", profile("Alice", "Human Assistant", "talks a lot")}, {"integrated_agent", "none"}, {"script", alice}},
          {{"profile", profile("Bob", "Human Assistant", "also talks a lot")}, {"integrated_agent", "none"}, {"script", bob}}}},
        {"task", {{"goal", goal}, {"initiator", "Alice"}, {"max_turns", k}}},
        {"expectations", {{"final_conclusion", "NO RESULT"}}},
    };
}

} // namespace testsupport
