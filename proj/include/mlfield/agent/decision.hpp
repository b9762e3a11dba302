#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mlfield/agent/task.hpp"

namespace mlfield::agent {

// What a decision model sees: earlier outer tasks and the current one.
struct DecisionContext {
  const std::vector<TaskState>& previous;
  const TaskState& current;
};

// Produces the pending tail of the inner sequence. Called once when a task
// starts and again after every executed subtask with its feedback in place.
class DecisionModel {
 public:
  virtual ~DecisionModel() = default;
  virtual std::string name() const = 0;
  // Throws ProviderError when the model cannot be reached.
  virtual std::vector<Subtask> decide(const DecisionContext& ctx) = 0;
};

struct SafetyPolicy {
  std::vector<std::string> denylist;  // case-insensitive phrases

  // Denylisted phrase found in `text`, if any.
  std::optional<std::string> match(const std::string& text) const;
};

// Built-in planner. Understands "find/locate/show/go to <target>",
// "move <direction> [distance]", refinements of the previous target ("its
// handle", "the one on the mug") and refuses denylisted requests.
class RuleDecisionModel final : public DecisionModel {
 public:
  explicit RuleDecisionModel(SafetyPolicy policy = {});
  std::string name() const override { return "rule"; }
  std::vector<Subtask> decide(const DecisionContext& ctx) override;

 private:
  SafetyPolicy policy_;
};

// External model over HTTP: POST {"requirement", "previous": [...], "subtasks":
// [...]} as JSON, reply {"subtasks": [{"module", "params", "rationale"}]}.
class HttpDecisionModel final : public DecisionModel {
 public:
  HttpDecisionModel(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(10));
  std::string name() const override { return "http"; }
  std::vector<Subtask> decide(const DecisionContext& ctx) override;

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
};

// Lowercased words of `text` (alphanumerics, apostrophes dropped).
std::vector<std::string> words(const std::string& text);

}  // namespace mlfield::agent
