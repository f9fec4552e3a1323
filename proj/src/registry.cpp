#include "agentnet/registry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>

#include "agentnet/error.hpp"
#include "agentnet/event_log.hpp"

namespace agentnet {

using nlohmann::json;

json to_json(const AgentProfile& p) {
    return {{"agent_name", p.agent_name}, {"agent_type", p.agent_type}, {"agent_description", p.agent_description}};
}

AgentProfile profile_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidProfile, "profile must be an object");
    AgentProfile p;
    try {
        p.agent_name = j.at("agent_name").get<std::string>();
        p.agent_type = j.value("agent_type", std::string{});
        p.agent_description = j.at("agent_description").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidProfile, e.what());
    }
    return p;
}

TokenBag tokenize(std::string_view text) {
    TokenBag bag;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            ++bag[cur];
            cur.clear();
        }
    };
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return bag;
}

TokenBag profile_tokens(const AgentProfile& p) {
    return tokenize(p.agent_name + " " + p.agent_type + " " + p.agent_description);
}

Registry::Registry() = default;

Registry::Registry(const std::filesystem::path& log_path) {
    for (const auto& ev : EventLog::read_all(log_path)) {
        auto kind = ev.value("event", std::string{});
        if (kind == "register") {
            RegistryRecord rec;
            rec.profile = profile_from_json(ev.at("profile"));
            rec.token_counts = profile_tokens(rec.profile);
            rec.registered_at = ev.at("registered_at").get<std::uint64_t>();
            next_registered_at_ = std::max(next_registered_at_, rec.registered_at + 1);
            insert_locked(std::move(rec));
        } else if (kind == "deregister") {
            erase_locked(ev.at("agent_name").get<std::string>());
        } else {
            throw Error(ErrorCode::MalformedLog, "unknown registry event '" + kind + "'");
        }
    }
    log_ = std::make_unique<EventLog>(log_path);
}

Registry::~Registry() = default;

void Registry::insert_locked(RegistryRecord record) {
    for (const auto& [tok, _] : record.token_counts) ++doc_freq_[tok];
    auto name = record.profile.agent_name;
    records_.emplace(std::move(name), std::move(record));
}

void Registry::erase_locked(const std::string& agent_name) {
    auto it = records_.find(agent_name);
    if (it == records_.end()) return;
    for (const auto& [tok, _] : it->second.token_counts) {
        auto df = doc_freq_.find(tok);
        if (df != doc_freq_.end() && --df->second == 0) doc_freq_.erase(df);
    }
    records_.erase(it);
}

RegistryRecord Registry::register_agent(const AgentProfile& profile) {
    if (profile.agent_name.empty()) throw Error(ErrorCode::InvalidProfile, "agent_name must be non-empty");
    if (profile.agent_name.front() == '@') throw Error(ErrorCode::InvalidProfile, "names starting with '@' are reserved");
    if (profile.agent_description.empty())
        throw Error(ErrorCode::InvalidProfile, "agent_description must be non-empty");

    std::unique_lock lock(mu_);
    if (records_.count(profile.agent_name)) throw Error(ErrorCode::DuplicateName, profile.agent_name);
    RegistryRecord rec{profile, profile_tokens(profile), next_registered_at_++};
    if (log_) log_->append({{"event", "register"}, {"profile", to_json(profile)}, {"registered_at", rec.registered_at}});
    insert_locked(rec);
    return rec;
}

void Registry::deregister_agent(const std::string& agent_name) {
    std::unique_lock lock(mu_);
    if (!records_.count(agent_name)) throw Error(ErrorCode::NotFound, agent_name);
    if (log_) log_->append({{"event", "deregister"}, {"agent_name", agent_name}});
    erase_locked(agent_name);
}

AgentProfile Registry::get_profile(const std::string& agent_name) const {
    std::shared_lock lock(mu_);
    auto it = records_.find(agent_name);
    if (it == records_.end()) throw Error(ErrorCode::NotFound, agent_name);
    return it->second.profile;
}

bool Registry::contains(const std::string& agent_name) const {
    std::shared_lock lock(mu_);
    return records_.count(agent_name) != 0;
}

std::size_t Registry::size() const {
    std::shared_lock lock(mu_);
    return records_.size();
}

std::vector<RegistryRecord> Registry::records() const {
    std::shared_lock lock(mu_);
    std::vector<RegistryRecord> out;
    out.reserve(records_.size());
    for (const auto& [_, rec] : records_) out.push_back(rec);
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.registered_at < b.registered_at; });
    return out;
}

std::vector<SearchHit> Registry::search_agents(const SearchQuery& query) const {
    if (query.characteristics.empty()) throw Error(ErrorCode::InvalidQuery, "no characteristics");
    if (query.limit == 0) throw Error(ErrorCode::InvalidQuery, "limit must be positive");
    std::vector<TokenBag> bags;
    for (const auto& c : query.characteristics) {
        auto bag = tokenize(c);
        if (bag.empty()) throw Error(ErrorCode::InvalidQuery, "characteristic '" + c + "' has no tokens");
        bags.push_back(std::move(bag));
    }

    std::shared_lock lock(mu_);
    const double n = static_cast<double>(records_.size());
    auto idf = [&](const std::string& tok) {
        auto it = doc_freq_.find(tok);
        double df = it == doc_freq_.end() ? 0.0 : it->second;
        return std::log((n + 1.0) / (df + 1.0)) + 1.0;
    };

    std::vector<double> query_norms;
    for (const auto& bag : bags) {
        double sq = 0.0;
        for (const auto& [tok, tf] : bag) sq += std::pow(tf * idf(tok), 2);
        query_norms.push_back(std::sqrt(sq));
    }

    std::vector<SearchHit> hits;
    for (const auto& [_, rec] : records_) {
        double doc_sq = 0.0;
        for (const auto& [tok, tf] : rec.token_counts) doc_sq += std::pow(tf * idf(tok), 2);
        const double doc_norm = std::sqrt(doc_sq);
        double total = 0.0;
        for (std::size_t i = 0; i < bags.size(); ++i) {
            double dot = 0.0;
            for (const auto& [tok, qtf] : bags[i]) {
                auto it = rec.token_counts.find(tok);
                if (it == rec.token_counts.end()) continue;
                double w = idf(tok);
                dot += (qtf * w) * (it->second * w);
            }
            if (dot > 0.0) total += dot / (query_norms[i] * doc_norm);
        }
        if (total > 0.0) hits.push_back({rec.profile, total});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.profile.agent_name < b.profile.agent_name;
    });
    if (hits.size() > query.limit) hits.resize(query.limit);
    return hits;
}

} // namespace agentnet
