#include "mlfield/agent/agent.hpp"

#include <algorithm>

#include "mlfield/common/error.hpp"

namespace mlfield::agent {
namespace {

constexpr int kMaxSubtasks = 32;

bool is_pending(const Subtask& s) { return s.status == SubtaskStatus::Pending; }

void replace_tail(TaskState& st, std::vector<Subtask> tail) {
  std::erase_if(st.subtasks, is_pending);
  for (auto& s : tail) {
    s.status = SubtaskStatus::Pending;
    s.feedback = nlohmann::json::object();
    st.subtasks.push_back(std::move(s));
  }
}

nlohmann::json execute(const Subtask& s, const TaskState& st, AgentEnvironment& env) {
  try {
    switch (s.module) {
      case Module::Localization: {
        const auto text = s.params.value("text", std::string());
        if (text.empty()) return {{"error", "localization needs a text"}};
        return env.localize(text, query::parse_level_hint(s.params.value("level", std::string("auto"))));
      }
      case Module::Navigation: {
        std::optional<std::uint32_t> target;
        if (s.params.contains("target_id")) target = s.params["target_id"].get<std::uint32_t>();
        for (auto it = st.subtasks.rbegin(); !target && it != st.subtasks.rend(); ++it)
          if (it->module == Module::Localization && it->status == SubtaskStatus::Done)
            target = it->feedback.value("target_id", 0u);
        if (!target) return {{"error", "nothing localized to navigate to"}};
        return env.navigate(*target);
      }
      case Module::Movement:
        return env.move(nav::parse_direction(s.params.value("direction", std::string())),
                        s.params.value("distance", 0.0));
      case Module::Render: return env.render();
      case Module::Respond: return {{"text", s.params.value("text", std::string())}};
      case Module::Refuse: return {{"reason", s.params.value("reason", std::string())}};
    }
  } catch (const Error& e) {
    return {{"error", e.what()}};
  } catch (const nlohmann::json::exception& e) {
    return {{"error", std::string("bad parameters: ") + e.what()}};
  }
  return {{"error", "unknown module"}};
}

// Reason to refuse the subtask before it runs, if any.
std::optional<std::string> screen(const Subtask& s, const TaskState& st, const AgentEnvironment& env,
                                  const SafetyPolicy& policy) {
  if (s.module != Module::Movement && s.module != Module::Navigation) return std::nullopt;
  if (auto hit = policy.match(st.requirement)) return "the request involves '" + *hit + "', which is on the denylist";
  if (s.module == Module::Movement) {
    try {
      const auto p = env.preview_move(nav::parse_direction(s.params.value("direction", std::string())),
                                      s.params.value("distance", 0.0));
      if (!env.inside_scene(p)) return std::string("the movement would leave the scene");
    } catch (const Error&) {
      return std::nullopt;  // reported by execution
    }
  }
  return std::nullopt;
}

}  // namespace

AgentResponse run_agent_step(std::vector<TaskState>& tasks, const std::string& input, DecisionModel& model,
                             AgentEnvironment& env, const SafetyPolicy& policy, DecisionModel* fallback) {
  RuleDecisionModel builtin(policy);
  if (!fallback) fallback = &builtin;

  TaskState st;
  st.requirement = input;
  st.history.push_back("requirement: " + input);
  auto decide = [&] {
    if (!st.degraded) {
      try {
        return model.decide({tasks, st});
      } catch (const ProviderError& e) {
        st.degraded = true;
        st.history.push_back("decision model " + model.name() + " failed (" + e.what() + "); using " +
                             fallback->name());
      }
    }
    return fallback->decide({tasks, st});
  };
  replace_tail(st, decide());
  st.history.push_back("plan: " + std::to_string(st.subtasks.size()) + " subtasks");

  AgentResponse response;
  int executed = 0;
  for (;;) {
    auto it = std::find_if(st.subtasks.begin(), st.subtasks.end(), is_pending);
    if (it == st.subtasks.end()) break;
    if (++executed > kMaxSubtasks) {
      st.status = TaskStatus::Failed;
      st.history.push_back("stopped: too many subtasks");
      std::erase_if(st.subtasks, is_pending);
      break;
    }
    it->status = SubtaskStatus::Active;
    validate(st);
    auto& sub = *it;

    if (auto reason = screen(sub, st, env, policy)) {
      sub.status = SubtaskStatus::Skipped;
      sub.feedback = {{"refused", *reason}};
      st.history.push_back(std::string(to_string(sub.module)) + ": refused, " + *reason);
      Subtask refuse;
      refuse.module = Module::Refuse;
      refuse.params = {{"reason", *reason}};
      refuse.rationale = "safety screening";
      replace_tail(st, {refuse});
      continue;
    }

    sub.feedback = execute(sub, st, env);
    sub.status = sub.feedback.contains("error") ? SubtaskStatus::Failed : SubtaskStatus::Done;
    st.history.push_back(std::string(to_string(sub.module)) + ": " + to_string(sub.status));
    if (sub.module == Module::Render) response.frames += sub.feedback.value("frames", 0);
    if (sub.module == Module::Respond) response.text = sub.feedback.value("text", std::string());
    if (sub.module == Module::Refuse) {
      response.refused = true;
      response.text = "I can't do that: " + sub.feedback.value("reason", std::string()) + ".";
      std::erase_if(st.subtasks, is_pending);
      break;
    }
    replace_tail(st, decide());
  }

  if (st.status == TaskStatus::Active) {
    bool failed = false;
    for (const auto& s : st.subtasks) failed = failed || s.status == SubtaskStatus::Failed;
    st.status = response.refused ? TaskStatus::Refused : failed ? TaskStatus::Failed : TaskStatus::Completed;
  }
  st.history.push_back(std::string("status: ") + to_string(st.status));
  validate(st);
  response.degraded = st.degraded;
  if (response.text.empty()) response.text = st.status == TaskStatus::Completed ? "Done." : "I could not complete that.";
  tasks.push_back(std::move(st));
  return response;
}

}  // namespace mlfield::agent
