#include "mlfield/agent/task.hpp"

#include "mlfield/common/error.hpp"

namespace mlfield::agent {

const char* to_string(Module m) {
  switch (m) {
    case Module::Localization: return "localization";
    case Module::Navigation: return "navigation";
    case Module::Movement: return "movement";
    case Module::Render: return "render";
    case Module::Respond: return "respond";
    case Module::Refuse: return "refuse";
  }
  return "?";
}

const char* to_string(SubtaskStatus s) {
  switch (s) {
    case SubtaskStatus::Pending: return "pending";
    case SubtaskStatus::Active: return "active";
    case SubtaskStatus::Done: return "done";
    case SubtaskStatus::Failed: return "failed";
    case SubtaskStatus::Skipped: return "skipped";
  }
  return "?";
}

const char* to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Active: return "active";
    case TaskStatus::Completed: return "completed";
    case TaskStatus::Refused: return "refused";
    case TaskStatus::Failed: return "failed";
  }
  return "?";
}

Module parse_module(const std::string& s) {
  for (auto m : {Module::Localization, Module::Navigation, Module::Movement, Module::Render, Module::Respond,
                 Module::Refuse})
    if (s == to_string(m)) return m;
  throw InvalidInput("unknown module '" + s + "'");
}

namespace {

SubtaskStatus parse_subtask_status(const std::string& s) {
  for (auto v : {SubtaskStatus::Pending, SubtaskStatus::Active, SubtaskStatus::Done, SubtaskStatus::Failed,
                 SubtaskStatus::Skipped})
    if (s == to_string(v)) return v;
  throw InvalidInput("unknown subtask status '" + s + "'");
}

TaskStatus parse_task_status(const std::string& s) {
  for (auto v : {TaskStatus::Active, TaskStatus::Completed, TaskStatus::Refused, TaskStatus::Failed})
    if (s == to_string(v)) return v;
  throw InvalidInput("unknown task status '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const Subtask& s) {
  return {{"module", to_string(s.module)},
          {"params", s.params},
          {"rationale", s.rationale},
          {"status", to_string(s.status)},
          {"feedback", s.feedback}};
}

Subtask subtask_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("module") || !j["module"].is_string())
    throw InvalidInput("subtask needs a string 'module'");
  Subtask s;
  s.module = parse_module(j["module"].get<std::string>());
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw InvalidInput("subtask 'params' must be an object");
    s.params = j["params"];
  }
  if (j.contains("rationale")) {
    if (!j["rationale"].is_string()) throw InvalidInput("subtask 'rationale' must be a string");
    s.rationale = j["rationale"].get<std::string>();
  }
  if (j.contains("status")) s.status = parse_subtask_status(j["status"].get<std::string>());
  if (j.contains("feedback")) s.feedback = j["feedback"];
  return s;
}

nlohmann::json to_json(const TaskState& s) {
  nlohmann::json subtasks = nlohmann::json::array();
  for (const auto& t : s.subtasks) subtasks.push_back(to_json(t));
  return {{"requirement", s.requirement},
          {"status", to_string(s.status)},
          {"degraded", s.degraded},
          {"subtasks", subtasks},
          {"history", s.history}};
}

TaskState task_from_json(const nlohmann::json& j) {
  try {
    TaskState s;
    s.requirement = j.at("requirement").get<std::string>();
    s.status = parse_task_status(j.at("status").get<std::string>());
    s.degraded = j.value("degraded", false);
    for (const auto& t : j.at("subtasks")) s.subtasks.push_back(subtask_from_json(t));
    s.history = j.at("history").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("task state: ") + e.what());
  }
}

void validate(const TaskState& s) {
  int active = 0;
  bool seen_pending = false;
  for (const auto& t : s.subtasks) {
    if (t.status == SubtaskStatus::Active) ++active;
    if (t.status == SubtaskStatus::Pending) seen_pending = true;
    else if (seen_pending) throw InvariantViolation("a subtask started after a pending one");
    if (t.status == SubtaskStatus::Active && seen_pending) throw InvariantViolation("active subtask after a pending one");
  }
  if (active > 1) throw InvariantViolation("more than one active subtask");
  if (s.status != TaskStatus::Active && active > 0) throw InvariantViolation("finished task still has an active subtask");
}

}  // namespace mlfield::agent
