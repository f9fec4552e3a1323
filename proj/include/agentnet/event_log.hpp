#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <vector>

#include "json.hpp"

namespace agentnet {

/// Append-only NDJSON file. Each record is one compact JSON line.
class EventLog {
public:
    explicit EventLog(std::filesystem::path path);

    void append(const nlohmann::json& record);
    void append_line(std::string_view line); // `line` must already end in '\n'

    const std::filesystem::path& path() const { return path_; }

    /// Parses every line; throws Error(MalformedLog) on a bad line.
    static std::vector<nlohmann::json> read_all(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mu_;
};

} // namespace agentnet
