#pragma once

// Client data blocks: contacts and task records.

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace agentnet {

struct ContactEntry {
    std::string agent_name;
    std::string description;
    std::string notes;

    bool operator==(const ContactEntry&) const = default;
};

enum class TaskMode { sync, async };
enum class TaskStatus { pending, in_progress, completed };

std::string_view to_string(TaskMode mode);
std::string_view to_string(TaskStatus status);

struct TaskRecord {
    std::string task_id;
    std::string comm_id; // group the task was assigned in
    std::string task_desc;
    std::string task_abstract;
    std::string assignee;
    TaskMode mode = TaskMode::sync;
    TaskStatus status = TaskStatus::pending;
    std::optional<std::string> conclusion;
    bool is_trigger = false;
    bool delegated = false; // handled by a spawned sub-group

    bool operator==(const TaskRecord&) const = default;
};

nlohmann::json to_json(const ContactEntry& c);
nlohmann::json to_json(const TaskRecord& t);

} // namespace agentnet
