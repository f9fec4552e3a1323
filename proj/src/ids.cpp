#include "agentnet/ids.hpp"

#include <mutex>
#include <regex>
#include <unordered_map>

#include <boost/uuid/uuid.hpp>
#include <boost/uuid/uuid_generators.hpp>
#include <boost/uuid/uuid_io.hpp>

namespace agentnet {

namespace {

const std::regex& uuid_pattern() {
    static const std::regex re("[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}");
    return re;
}

} // namespace

std::string make_uuid_v4() {
    static std::mutex mu;
    static boost::uuids::random_generator gen;
    std::lock_guard lock(mu);
    return boost::uuids::to_string(gen());
}

bool is_uuid_v4(std::string_view s) {
    return std::regex_match(s.begin(), s.end(), uuid_pattern());
}

std::string normalize_uuids(std::string_view text) {
    std::unordered_map<std::string, std::string> names;
    std::string out;
    out.reserve(text.size());
    auto begin = std::cregex_iterator(text.data(), text.data() + text.size(), uuid_pattern());
    const char* last = text.data();
    for (auto it = begin; it != std::cregex_iterator(); ++it) {
        const auto& m = *it;
        out.append(last, m[0].first);
        auto [pos, inserted] = names.try_emplace(m.str(), "");
        if (inserted) pos->second = "id-" + std::to_string(names.size());
        out += pos->second;
        last = m[0].second;
    }
    out.append(last, text.data() + text.size());
    return out;
}

} // namespace agentnet
