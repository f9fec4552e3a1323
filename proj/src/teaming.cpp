#include "agentnet/teaming.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "agentnet/error.hpp"

namespace agentnet {

using nlohmann::json;

std::vector<std::string> forced_launch_members(const std::vector<SearchHit>& hits, const std::string& self) {
    std::map<std::string, double> best;
    for (const auto& h : hits) {
        if (h.profile.agent_name == self) continue;
        auto [it, fresh] = best.emplace(h.profile.agent_name, h.score);
        if (!fresh) it->second = std::max(it->second, h.score);
    }
    std::vector<std::pair<std::string, double>> ranked(best.begin(), best.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (const auto& [name, score] : ranked) {
        if (out.size() == kForcedLaunchSize) break;
        out.push_back(name);
    }
    return out;
}

TeamFormation form_team(const TeamRequest& request, Policy& policy, ServerLink& link,
                        const std::vector<ContactEntry>& contacts) {
    std::vector<SearchHit> results;
    TeamFormation out;
    std::optional<LaunchCall> launch;

    while (!launch) {
        if (out.tool_calls == kMaxToolCalls - 1) {
            auto members = forced_launch_members(results, request.self);
            launch = LaunchCall{members.empty() ? std::nullopt : std::optional{members}};
            out.forced = true;
            break;
        }
        TeamContext ctx{request.self, request.task, results, contacts, out.tool_calls};
        auto call = policy.decide_team_action(ctx);
        if (auto* search = std::get_if<SearchCall>(&call)) {
            ++out.tool_calls;
            auto hits = link.search(SearchQuery{search->characteristics, 10});
            results.insert(results.end(), hits.begin(), hits.end());
        } else {
            launch = std::get<LaunchCall>(call);
        }
    }

    ++out.tool_calls;
    GroupSpec spec;
    spec.initiator = request.self;
    spec.team_members = launch->team_members.value_or(std::vector<std::string>{request.self});
    spec.goal = request.task;
    spec.team_up_depth = request.team_up_depth;
    spec.max_turns = request.max_turns;
    spec.parent_task = request.parent_task;
    out.members = spec.team_members;
    try {
        out.comm_id = link.setup_group(spec);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ServerUnreachable) throw;
        throw Error(ErrorCode::LaunchRejected, std::string(to_string(e.code())) + ": " + e.detail());
    }
    return out;
}

TeamFormation spawn_subgroup(const std::string& self, const std::string& parent_comm_id, std::int64_t parent_depth,
                             const std::string& task_id, const std::string& task_desc, std::int64_t max_depth,
                             std::optional<std::int64_t> max_turns, Policy& policy, ServerLink& link,
                             const std::vector<ContactEntry>& contacts) {
    if (parent_depth + 1 > max_depth)
        throw Error(ErrorCode::DepthExceeded,
                    "depth " + std::to_string(parent_depth + 1) + " exceeds the maximum " + std::to_string(max_depth));
    TeamRequest req{self, task_desc, parent_depth + 1, max_turns, ParentTask{parent_comm_id, task_id}};
    return form_team(req, policy, link, contacts);
}

std::vector<TeamTree> build_team_trees(const std::vector<GroupRecord>& groups) {
    std::map<std::string, std::vector<const GroupRecord*>> children;
    std::vector<const GroupRecord*> roots;
    for (const auto& g : groups) {
        if (g.parent_task) {
            children[g.parent_task->comm_id].push_back(&g);
        } else {
            roots.push_back(&g);
        }
    }
    std::function<TeamTree(const GroupRecord&)> build = [&](const GroupRecord& g) {
        TeamTree t{g.comm_id, g.team_members, g.team_up_depth, {}};
        for (const auto* c : children[g.comm_id]) t.children.push_back(build(*c));
        return t;
    };
    std::vector<TeamTree> out;
    for (const auto* r : roots) out.push_back(build(*r));
    return out;
}

std::uint64_t edges_full(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

std::uint64_t edges_nested(const TeamTree& tree) {
    auto total = edges_full(tree.members.size());
    for (const auto& c : tree.children) total += edges_nested(c);
    return total;
}

std::vector<std::string> union_members(const TeamTree& tree) {
    std::set<std::string> seen;
    std::vector<std::string> out;
    std::function<void(const TeamTree&)> walk = [&](const TeamTree& t) {
        for (const auto& m : t.members) {
            if (seen.insert(m).second) out.push_back(m);
        }
        for (const auto& c : t.children) walk(c);
    };
    walk(tree);
    return out;
}

std::uint64_t edges_full_flat(const TeamTree& tree) { return edges_full(union_members(tree).size()); }

json to_json(const TeamTree& tree) {
    json children = json::array();
    for (const auto& c : tree.children) children.push_back(to_json(c));
    return {{"comm_id", tree.comm_id},
            {"members", tree.members},
            {"depth", tree.depth},
            {"edges_full", edges_full(tree.members.size())},
            {"edges_nested", edges_nested(tree)},
            {"edges_full_flat", edges_full_flat(tree)},
            {"children", std::move(children)}};
}

} // namespace agentnet
