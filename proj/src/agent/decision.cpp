#include "mlfield/agent/decision.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <regex>
#include <set>

#include <httplib.h>

#include "mlfield/common/error.hpp"

namespace mlfield::agent {
namespace {

const std::set<std::string> kFindVerbs = {"find", "locate", "show", "where", "look", "go", "navigate", "see", "view"};
const std::set<std::string> kActVerbs = {"press", "push", "pull", "open", "close", "grab", "pick", "touch", "turn"};
const std::set<std::string> kMoveVerbs = {"move", "step", "walk", "go", "fly"};
const std::set<std::string> kFillers = {"me", "the", "a", "an", "is", "are", "at", "to", "for", "please", "can",
                                        "you", "could", "find", "up", "on", "of", "one", "i", "mean", "no", "it",
                                        "its", "with", "in", "that", "this"};
const std::set<std::string> kLinks = {"on", "of", "in", "with"};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string join(const std::vector<std::string>& w, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to && i < w.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += w[i];
  }
  return out;
}

bool has(const std::vector<std::string>& w, const std::string& s) { return std::find(w.begin(), w.end(), s) != w.end(); }

// Words after the leading fillers.
std::string content_after(const std::vector<std::string>& w, std::size_t from) {
  while (from < w.size() && kFillers.count(w[from])) ++from;
  return join(w, from, w.size());
}

std::optional<std::string> direction_word(const std::vector<std::string>& w) {
  for (const auto& x : w) {
    if (x == "forward" || x == "forwards" || x == "ahead") return std::string("forward");
    if (x == "back" || x == "backward" || x == "backwards") return std::string("back");
    if (x == "left" || x == "right" || x == "up" || x == "down") return x;
  }
  return std::nullopt;
}

std::string format_number(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

// Target text of the most recent earlier task that localized something.
std::optional<std::string> previous_target(const std::vector<TaskState>& previous) {
  for (auto it = previous.rbegin(); it != previous.rend(); ++it)
    for (const auto& s : it->subtasks)
      if (s.module == Module::Localization && s.status == SubtaskStatus::Done) return s.params.value("text", "");
  return std::nullopt;
}

struct Intent {
  enum Kind { Find, Move, Refuse, Unknown } kind = Unknown;
  std::string target;
  std::string level = "auto";
  std::string direction;
  double distance = 1.0;
  std::string note;  // extra sentence for the reply
};

Intent parse(const std::string& requirement, const std::vector<TaskState>& previous, const SafetyPolicy& policy) {
  Intent in;
  if (auto hit = policy.match(requirement)) {
    in.kind = Intent::Refuse;
    in.note = "the request involves '" + *hit + "', which is on the denylist";
    return in;
  }
  const auto w = words(requirement);
  if (w.empty()) return in;

  const auto dir = direction_word(w);
  if (kMoveVerbs.count(w[0]) && dir && !has(w, "to")) {
    in.kind = Intent::Move;
    in.direction = *dir;
    static const std::regex number(R"((\d+(\.\d+)?|\.\d+))");
    std::smatch m;
    if (std::regex_search(requirement, m, number)) in.distance = std::stod(m.str());
    return in;
  }

  const auto prev = previous_target(previous);
  // "its handle", "show me its handle"
  if (prev && has(w, "its")) {
    const auto at = std::find(w.begin(), w.end(), "its") - w.begin();
    const auto part = join(w, at + 1, w.size());
    if (!part.empty()) {
      in.kind = Intent::Find;
      in.target = part + " of " + *prev;
      in.level = "part";
      return in;
    }
  }
  // "the one on the mug", "no, of the controller"
  const bool leading_verb = kFindVerbs.count(w[0]) || kActVerbs.count(w[0]);
  if (prev && !leading_verb) {
    for (std::size_t i = 0; i < w.size(); ++i)
      if (kLinks.count(w[i])) {
        const auto owner = content_after(w, i + 1);
        if (owner.empty()) break;
        in.kind = Intent::Find;
        in.target = *prev + " of " + owner;
        in.level = "part";
        return in;
      }
  }

  if (leading_verb) {
    in.kind = Intent::Find;
    if (kActVerbs.count(w[0])) in.note = "I cannot " + w[0] + " things, so I am showing it instead";
    auto target = content_after(w, 1);
    if (target.empty()) return Intent{};
    in.target = target;
    const auto tw = words(target);
    for (std::size_t i = 1; i + 1 < tw.size(); ++i)
      if (tw[i] == "of" || tw[i] == "on") in.level = "part";
  }
  return in;
}

Subtask make(Module m, nlohmann::json params, std::string rationale) {
  Subtask s;
  s.module = m;
  s.params = std::move(params);
  s.rationale = std::move(rationale);
  return s;
}

const Subtask* last_done(const TaskState& st, Module m) {
  const Subtask* out = nullptr;
  for (const auto& s : st.subtasks)
    if (s.module == m && s.status == SubtaskStatus::Done) out = &s;
  return out;
}

const Subtask* first_failure(const TaskState& st) {
  for (const auto& s : st.subtasks)
    if (s.status == SubtaskStatus::Failed) return &s;
  return nullptr;
}

std::size_t finished_count(const TaskState& st) {
  std::size_t n = 0;
  for (const auto& s : st.subtasks)
    if (s.status != SubtaskStatus::Pending && s.status != SubtaskStatus::Active) ++n;
  return n;
}

std::string found_text(const Subtask& loc) {
  const auto& f = loc.feedback;
  std::string name = f.value("label", "");
  if (name.empty()) name = "target " + std::to_string(f.value("target_id", 0u));
  return name + " (" + f.value("level", std::string("object")) + ", relevancy " +
         format_number(f.value("relevancy", 0.0), "%.3f") + ")";
}

}  // namespace

std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : lower(text)) {
    if (std::isalnum(static_cast<unsigned char>(c))) cur += c;
    else if (c == '\'') continue;
    else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::optional<std::string> SafetyPolicy::match(const std::string& text) const {
  const auto w = " " + join(words(text), 0, std::string::npos) + " ";
  for (const auto& phrase : denylist) {
    const auto p = join(words(phrase), 0, std::string::npos);
    if (!p.empty() && w.find(" " + p + " ") != std::string::npos) return phrase;
  }
  return std::nullopt;
}

RuleDecisionModel::RuleDecisionModel(SafetyPolicy policy) : policy_(std::move(policy)) {}

std::vector<Subtask> RuleDecisionModel::decide(const DecisionContext& ctx) {
  const auto& st = ctx.current;
  const auto in = parse(st.requirement, ctx.previous, policy_);
  std::vector<Subtask> plan;
  switch (in.kind) {
    case Intent::Refuse:
      plan.push_back(make(Module::Refuse, {{"reason", in.note}}, "safety screening of the requirement"));
      break;
    case Intent::Unknown:
      plan.push_back(make(Module::Respond,
                          {{"text", "Sorry, I did not understand. Try \"find <something>\" or \"move forward 1\"."}},
                          "no executable intent"));
      break;
    case Intent::Move:
      plan.push_back(make(Module::Movement, {{"direction", in.direction}, {"distance", in.distance}},
                          "single movement command"));
      plan.push_back(make(Module::Render, nlohmann::json::object(), "show the new view"));
      plan.push_back(make(Module::Respond,
                          {{"text", "Moved " + in.direction + " by " + format_number(in.distance, "%g") + "."}},
                          "report the movement"));
      break;
    case Intent::Find: {
      plan.push_back(make(Module::Localization, {{"text", in.target}, {"level", in.level}}, "find the target"));
      plan.push_back(make(Module::Navigation, nlohmann::json::object(), "reach a view of the target"));
      plan.push_back(make(Module::Render, nlohmann::json::object(), "stream the path"));
      plan.push_back(make(Module::Respond, nlohmann::json::object(), "report the result"));
      break;
    }
  }

  const auto done = finished_count(st);
  if (const auto* failed = first_failure(st)) {
    const auto error = failed->feedback.value("error", std::string("unknown error"));
    std::vector<Subtask> tail;
    if (failed->module == Module::Navigation) {
      const auto* loc = last_done(st, Module::Localization);
      tail.push_back(make(Module::Render, nlohmann::json::object(), "show the current view instead"));
      tail.push_back(make(Module::Respond,
                          {{"text", "I found " + (loc ? found_text(*loc) : std::string("the target")) +
                                        " but cannot reach a view of it (" + error + ")."}},
                          "navigation failed"));
    } else {
      tail.push_back(make(Module::Respond,
                          {{"text", std::string("The ") + to_string(failed->module) + " step failed: " + error + "."}},
                          "module failure"));
    }
    // skip the part of the recovery tail that already ran
    std::size_t after_failure = 0;
    bool seen = false;
    for (const auto& s : st.subtasks) {
      if (&s == failed) seen = true;
      else if (seen && s.status != SubtaskStatus::Pending && s.status != SubtaskStatus::Active) ++after_failure;
    }
    if (after_failure >= tail.size()) return {};
    return {tail.begin() + static_cast<std::ptrdiff_t>(after_failure), tail.end()};
  }

  if (done >= plan.size()) return {};
  std::vector<Subtask> tail(plan.begin() + static_cast<std::ptrdiff_t>(done), plan.end());
  for (auto& s : tail) {
    if (s.module == Module::Navigation) {
      if (const auto* loc = last_done(st, Module::Localization)) s.params["target_id"] = loc->feedback["target_id"];
    }
    if (s.module == Module::Respond && in.kind == Intent::Find) {
      const auto* loc = last_done(st, Module::Localization);
      const auto* nav = last_done(st, Module::Navigation);
      if (loc && nav) {
        std::string text = "Found " + found_text(*loc) + ". Moved along " +
                           std::to_string(nav->feedback.value("keypoints", nlohmann::json::array()).size()) +
                           " keypoints to view it.";
        if (!in.note.empty()) text += " " + in.note + ".";
        s.params["text"] = text;
      }
    }
  }
  return tail;
}

HttpDecisionModel::HttpDecisionModel(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
  if (url_.find("://") == std::string::npos) throw InvalidInput("decision model URL needs a scheme: " + url_);
}

std::vector<Subtask> HttpDecisionModel::decide(const DecisionContext& ctx) {
  const auto scheme_end = url_.find("://");
  const auto path_start = url_.find('/', scheme_end + 3);
  httplib::Client client(url_.substr(0, path_start));
  const auto path = path_start == std::string::npos ? std::string("/") : url_.substr(path_start);
  const auto secs = timeout_.count() / 1000, usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);

  nlohmann::json previous = nlohmann::json::array();
  for (const auto& t : ctx.previous) previous.push_back({{"requirement", t.requirement}, {"status", to_string(t.status)}});
  nlohmann::json subtasks = nlohmann::json::array();
  for (const auto& s : ctx.current.subtasks) subtasks.push_back(to_json(s));
  const nlohmann::json body = {
      {"requirement", ctx.current.requirement}, {"previous", previous}, {"subtasks", subtasks}};

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw ProviderError("decision model unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw ProviderError("decision model returned HTTP " + std::to_string(res->status));
  try {
    const auto reply = nlohmann::json::parse(res->body);
    std::vector<Subtask> out;
    for (const auto& j : reply.at("subtasks")) {
      auto s = subtask_from_json(j);
      s.status = SubtaskStatus::Pending;
      s.feedback = nlohmann::json::object();
      out.push_back(std::move(s));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("decision model reply: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ProviderError(std::string("decision model reply: ") + e.what());
  }
}

}  // namespace mlfield::agent
