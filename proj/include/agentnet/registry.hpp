#pragma once

// Agent registry with deterministic TF-IDF cosine discovery.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace agentnet {

class EventLog;

struct AgentProfile {
    std::string agent_name;
    std::string agent_type;
    std::string agent_description;

    bool operator==(const AgentProfile&) const = default;
};

nlohmann::json to_json(const AgentProfile& p);
AgentProfile profile_from_json(const nlohmann::json& j);

using TokenBag = std::map<std::string, std::uint32_t>;

/// Lowercase, split on anything that is not an ASCII letter or digit, drop empties.
TokenBag tokenize(std::string_view text);

/// Token bag of name + type + description.
TokenBag profile_tokens(const AgentProfile& p);

struct RegistryRecord {
    AgentProfile profile;
    TokenBag token_counts;
    std::uint64_t registered_at = 0;
};

struct SearchQuery {
    std::vector<std::string> characteristics;
    std::size_t limit = 10;
};

struct SearchHit {
    AgentProfile profile;
    double score = 0.0;
};

class Registry {
public:
    Registry();
    /// Replays the event log at `log_path` (if present) and appends to it.
    explicit Registry(const std::filesystem::path& log_path);
    ~Registry();

    Registry(const Registry&) = delete;
    Registry& operator=(const Registry&) = delete;

    RegistryRecord register_agent(const AgentProfile& profile);
    void deregister_agent(const std::string& agent_name);

    AgentProfile get_profile(const std::string& agent_name) const;
    bool contains(const std::string& agent_name) const;
    std::size_t size() const;

    /// Records ordered by registration.
    std::vector<RegistryRecord> records() const;

    std::vector<SearchHit> search_agents(const SearchQuery& query) const;

private:
    void insert_locked(RegistryRecord record);
    void erase_locked(const std::string& agent_name);

    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, RegistryRecord> records_;
    std::unordered_map<std::string, std::uint32_t> doc_freq_;
    std::uint64_t next_registered_at_ = 0;
    std::unique_ptr<EventLog> log_;
};

} // namespace agentnet
