#pragma once

// Generators and independent oracles shared by the unit tests and the
// acceptance binary. Nothing here calls into the code under test to decide
// what the right answer is.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentnet/protocol.hpp"
#include "agentnet/registry.hpp"
#include "agentnet/server.hpp"
#include "agentnet/teaming.hpp"

namespace testsupport {

using Rng = std::mt19937_64;

// ---- protocol -------------------------------------------------------------

/// Random string mixing ASCII, JSON metacharacters, control bytes and
/// multi-byte UTF-8.
std::string random_text(Rng& rng, std::size_t max_len = 24, bool allow_empty = true);

/// A message that satisfies every schema and kind/field rule.
agentnet::AgentMessage random_valid_message(Rng& rng);

/// Test-side canonical serializer: sorted keys, compact separators, the
/// same escaping rules as the production encoder but written from scratch.
std::string canonical_frame(const agentnet::AgentMessage& msg);

/// One invalid frame derived from a valid one; `label` names the mutation.
std::string mutate_frame(Rng& rng, const agentnet::AgentMessage& base, std::string& label);

// ---- conversation state machine -----------------------------------------

/// What the brute-force interpreter derives from a whole prefix.
struct OracleState {
    agentnet::ConversationState state = agentnet::ConversationState::discussion;
    std::int64_t turn_count = 0;
    std::set<std::string> floor;
    std::set<std::string> open_sync;
    std::set<std::string> open_async;
    std::set<std::string> open_triggers;
    bool granted = false;
    bool forced = false;
    bool quiescent = false;
};

/// Re-derives the machine from scratch. `prefix` must be a legal sequence
/// (every frame accepted) starting with the setup notice.
OracleState oracle_state(const std::vector<agentnet::AgentMessage>& prefix, std::int64_t default_max_turns = 20);

/// Whether `next` is a legal continuation of `prefix`.
bool oracle_legal(const std::vector<agentnet::AgentMessage>& prefix, const agentnet::AgentMessage& next,
                  std::int64_t default_max_turns = 20);

/// oracle_legal for many candidates, deriving the prefix once.
std::vector<bool> oracle_legal_all(const std::vector<agentnet::AgentMessage>& prefix,
                                   const std::vector<agentnet::AgentMessage>& candidates,
                                   std::int64_t default_max_turns = 20);

/// Setup notice as the server builds it.
agentnet::AgentMessage setup_notice(const std::string& comm_id, const std::vector<std::string>& members,
                                    std::int64_t max_turns);

/// Every candidate next frame worth probing after `prefix`: legal moves for
/// each member plus near misses (wrong speaker, reused ids, bad owners...).
std::vector<agentnet::AgentMessage> candidate_frames(Rng& rng, const std::vector<agentnet::AgentMessage>& prefix,
                                                     std::uint64_t& id_counter);

std::string describe_machine(const agentnet::ChatMachine& m);
std::string describe_oracle(const OracleState& s);
/// Empty when the machine matches the oracle, otherwise what differs.
std::string compare(const agentnet::ChatMachine& m, const OracleState& s);

// ---- routing ----------------------------------------------------------------

/// Channel that records every line it is handed.
class RecordingChannel : public agentnet::Channel {
public:
    void push(std::string_view line) override;
    std::vector<std::string> lines() const;

private:
    mutable std::mutex mu_;
    std::vector<std::string> lines_;
};

struct RoutingTrial {
    std::size_t clients = 0;
    std::size_t groups = 0;
    std::size_t frames = 0; // routed by the server, notices included
    std::vector<std::string> failures;
};

/// Random hub workload: `n_clients` agents, `n_groups` overlapping groups,
/// drivers on separate threads routing until at least `min_frames` frames
/// exist. Checks delivery sets, gapless seq, transcript equality and
/// isolation against what each channel actually received.
RoutingTrial run_routing_trial(std::uint64_t seed, std::size_t n_clients, std::size_t n_groups, std::size_t min_frames);

// ---- registry ---------------------------------------------------------------

/// Brute-force TF-IDF cosine ranking over dense vectors of the whole vocabulary.
std::vector<std::pair<std::string, double>> oracle_search(const std::vector<agentnet::AgentProfile>& corpus,
                                                          const std::vector<std::string>& characteristics,
                                                          std::size_t limit);

/// Token bag of a text, by a plain character scan.
std::map<std::string, int> oracle_tokens(const std::string& text);

// ---- teaming ----------------------------------------------------------------

std::uint64_t pair_count(const std::set<std::string>& members);
std::uint64_t oracle_edges_nested(const agentnet::TeamTree& t);
std::uint64_t oracle_edges_flat(const agentnet::TeamTree& t);

/// Arbitrary tree: random sizes and members drawn from a small shared pool.
agentnet::TeamTree random_tree(Rng& rng, int max_depth = 3);

/// Tree where each child holds its initiator (a member of its parent) plus
/// k >= 1 members that appear nowhere else in the tree.
agentnet::TeamTree random_initiator_tree(Rng& rng, int max_depth = 3);

/// Sum over non-root nodes, parents first, of k_i * (N_i - 1) with N_i the
/// size of the member union before the node is added.
std::uint64_t predicted_gap(const agentnet::TeamTree& t);

// ---- scenarios -----------------------------------------------------------------

/// Lead plus 1-3 workers: async assignments, an optional discussion detour,
/// a pause on a random subset of the assignees, then a conclusion. Workers
/// get random latencies and some fail.
nlohmann::json random_trigger_scenario(Rng& rng, int index);

/// Two agents that keep handing the floor to each other under max_turns = k.
nlohmann::json ping_pong_scenario(std::int64_t k, int extra_records);

} // namespace testsupport
