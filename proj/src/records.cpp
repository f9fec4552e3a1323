#include "agentnet/records.hpp"

namespace agentnet {

using nlohmann::json;

std::string_view to_string(TaskMode mode) { return mode == TaskMode::sync ? "sync" : "async"; }

std::string_view to_string(TaskStatus status) {
    switch (status) {
    case TaskStatus::pending: return "pending";
    case TaskStatus::in_progress: return "in_progress";
    case TaskStatus::completed: return "completed";
    }
    return "pending";
}

json to_json(const ContactEntry& c) {
    return {{"agent_name", c.agent_name}, {"description", c.description}, {"notes", c.notes}};
}

json to_json(const TaskRecord& t) {
    json j = {{"task_id", t.task_id},
              {"comm_id", t.comm_id},
              {"task_desc", t.task_desc},
              {"task_abstract", t.task_abstract},
              {"assignee", t.assignee},
              {"mode", to_string(t.mode)},
              {"status", to_string(t.status)},
              {"is_trigger", t.is_trigger},
              {"delegated", t.delegated}};
    if (t.conclusion) j["conclusion"] = *t.conclusion;
    return j;
}

} // namespace agentnet
