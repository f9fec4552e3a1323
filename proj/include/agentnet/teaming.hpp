#pragma once

// Team formation, sub-group spawning and the team tree with its edge metrics.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentnet/link.hpp"
#include "agentnet/policy.hpp"
#include "agentnet/server.hpp"

namespace agentnet {

inline constexpr int kMaxToolCalls = 10;
inline constexpr std::size_t kForcedLaunchSize = 5;

struct TeamFormation {
    std::string comm_id;
    int tool_calls = 0; // including the launch
    bool forced = false;
    std::vector<std::string> members; // as passed to setup_group
};

struct TeamRequest {
    std::string self;
    std::string task;
    std::int64_t team_up_depth = 0;
    std::optional<std::int64_t> max_turns;
    std::optional<ParentTask> parent_task;
};

/// Asks the policy for tool calls until it launches. The tenth call is
/// always a launch: if the policy has not launched by then, the group is
/// formed from the best-scoring agents found so far (or solo).
/// setup_group failures surface as Error(LaunchRejected).
TeamFormation form_team(const TeamRequest& request, Policy& policy, ServerLink& link,
                        const std::vector<ContactEntry>& contacts);

/// Members of a forced launch: distinct agents from `hits` other than
/// `self`, by best score descending then name, at most kForcedLaunchSize.
std::vector<std::string> forced_launch_members(const std::vector<SearchHit>& hits, const std::string& self);

/// Forms a child group for `task_id` (assigned to `self` in the parent).
/// Throws Error(DepthExceeded) when parent_depth + 1 > max_depth.
TeamFormation spawn_subgroup(const std::string& self, const std::string& parent_comm_id, std::int64_t parent_depth,
                             const std::string& task_id, const std::string& task_desc, std::int64_t max_depth,
                             std::optional<std::int64_t> max_turns, Policy& policy, ServerLink& link,
                             const std::vector<ContactEntry>& contacts);

struct TeamTree {
    std::string comm_id;
    std::vector<std::string> members;
    std::int64_t depth = 0;
    std::vector<TeamTree> children;
};

/// Roots of the forest described by `groups` (children linked by parent_task).
std::vector<TeamTree> build_team_trees(const std::vector<GroupRecord>& groups);

std::uint64_t edges_full(std::uint64_t n);
std::uint64_t edges_nested(const TeamTree& tree);
/// Distinct members over the whole tree.
std::vector<std::string> union_members(const TeamTree& tree);
std::uint64_t edges_full_flat(const TeamTree& tree);

nlohmann::json to_json(const TeamTree& tree);

} // namespace agentnet
