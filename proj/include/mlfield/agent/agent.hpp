#pragma once

#include <string>
#include <vector>

#include "mlfield/agent/decision.hpp"
#include "mlfield/agent/environment.hpp"
#include "mlfield/agent/task.hpp"

namespace mlfield::agent {

struct AgentResponse {
  std::string text;
  bool refused = false;
  bool degraded = false;
  int frames = 0;  // frames rendered during the step
};

// Outer loop for one user input: records the requirement, asks the model
// for a subtask sequence, executes it while letting the model revise the
// remaining subtasks after each feedback. Movement and navigation are
// screened first (denylist on the requirement, scene bounds for movement);
// a screened subtask is skipped and replaced by a refusal. When the model
// throws ProviderError, `fallback` takes over and the task is flagged
// degraded. Appends the finished TaskState to `tasks`.
AgentResponse run_agent_step(std::vector<TaskState>& tasks, const std::string& input, DecisionModel& model,
                             AgentEnvironment& env, const SafetyPolicy& policy, DecisionModel* fallback = nullptr);

}  // namespace mlfield::agent
