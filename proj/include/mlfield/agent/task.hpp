#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mlfield::agent {

enum class Module { Localization, Navigation, Movement, Render, Respond, Refuse };
enum class SubtaskStatus { Pending, Active, Done, Failed, Skipped };
enum class TaskStatus { Active, Completed, Refused, Failed };

const char* to_string(Module m);
const char* to_string(SubtaskStatus s);
const char* to_string(TaskStatus s);
// Throws InvalidInput on unknown names.
Module parse_module(const std::string& s);

struct Subtask {
  Module module = Module::Respond;
  nlohmann::json params = nlohmann::json::object();
  std::string rationale;
  SubtaskStatus status = SubtaskStatus::Pending;
  nlohmann::json feedback = nlohmann::json::object();

  friend bool operator==(const Subtask&, const Subtask&) = default;
};

// One outer-loop task: the user requirement and the inner subtask sequence
// executed for it. Subtasks before the active one are finished and never
// rewritten; the pending tail may be replaced by the decision model.
struct TaskState {
  std::string requirement;
  TaskStatus status = TaskStatus::Active;
  std::vector<Subtask> subtasks;
  std::vector<std::string> history;
  bool degraded = false;  // decision model unreachable, rule-based fallback used

  friend bool operator==(const TaskState&, const TaskState&) = default;
};

// {"requirement", "status", "degraded", "subtasks": [{"module", "params",
// "rationale", "status", "feedback"}], "history": [...]}
nlohmann::json to_json(const TaskState& s);
TaskState task_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Subtask& s);
// Accepts {"module", "params"?, "rationale"?}; status and feedback as stored
// when present. Throws InvalidInput on a malformed entry.
Subtask subtask_from_json(const nlohmann::json& j);

// Throws InvariantViolation unless at most one subtask is active, nothing
// after a pending subtask has started, and a finished task has none active.
void validate(const TaskState& s);

}  // namespace mlfield::agent
