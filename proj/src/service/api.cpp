#include "mlfield/service/api.hpp"

#include <sstream>

#include "mlfield/common/error.hpp"

namespace mlfield::service {
namespace {

using nlohmann::json;

struct MethodNotAllowed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Target {
  std::vector<std::string> segments;
  std::map<std::string, std::string> params;
};

Target parse_target(const std::string& target) {
  Target t;
  const auto q = target.find('?');
  std::stringstream path(target.substr(0, q));
  std::string seg;
  while (std::getline(path, seg, '/'))
    if (!seg.empty()) t.segments.push_back(seg);
  if (q != std::string::npos) {
    std::stringstream qs(target.substr(q + 1));
    std::string kv;
    while (std::getline(qs, kv, '&')) {
      const auto eq = kv.find('=');
      t.params[kv.substr(0, eq)] = eq == std::string::npos ? "" : kv.substr(eq + 1);
    }
  }
  return t;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v.empty() || v == "0" || v == "false" || v == "no") return false;
  throw InvalidInput(key + " must be a boolean");
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidInput("request body must be a JSON object");
  return j;
}

std::string require_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) throw InvalidInput(std::string("missing string field ") + key);
  return body[key].get<std::string>();
}

HttpResponse json_response(int status, const json& j) { return {status, "application/json", j.dump()}; }

HttpResponse route(Service& service, const HttpRequest& req) {
  const auto t = parse_target(req.target);
  const auto& s = t.segments;
  auto method = [&](const char* m) {
    if (req.method != m) throw MethodNotAllowed(req.method + " not allowed on " + req.target);
  };

  if (s.size() == 1 && s[0] == "healthz") {
    method("GET");
    return json_response(200, {{"status", "ok"}, {"sessions", service.session_count()}});
  }
  if (s.empty() || s[0] != "sessions") throw NotFound("no route for " + req.target);

  if (s.size() == 1) {
    method("POST");
    const auto body = parse_body(req.body);
    std::string scene;
    if (body.contains("scene")) scene = require_string(body, "scene");
    auto session = service.create_session(scene);
    auto turn = session->turn();
    return json_response(201, {{"session_id", session->id()},
                               {"scene", session->assets().name},
                               {"pose", field::camera_to_json(session->pose())}});
  }
  if (s.size() != 3) throw NotFound("no route for " + req.target);
  const auto& action = s[2];
  if (action != "chat" && action != "query" && action != "move" && action != "frame")
    throw NotFound("no route for " + req.target);
  auto session = service.find(s[1]);

  if (action == "frame") {
    method("GET");
    const bool overlay = t.params.count("overlay") ? parse_bool("overlay", t.params.at("overlay")) : false;
    auto turn = session->turn();
    const auto png = session->frame(overlay);
    return {200, "image/png", std::string(png.begin(), png.end())};
  }

  method("POST");
  const auto body = parse_body(req.body);
  if (action == "chat") {
    const auto text = require_string(body, "text");
    if (text.empty()) throw InvalidInput("text is empty");
    auto turn = session->turn();
    return json_response(200, session->chat(text));
  }
  if (action == "query") {
    const auto text = require_string(body, "text");
    const auto level = body.contains("level") ? require_string(body, "level") : std::string("auto");
    int k = 0;
    if (body.contains("k")) {
      if (!body["k"].is_number_integer() || body["k"].get<int>() < 1) throw InvalidInput("k must be a positive integer");
      k = body["k"].get<int>();
    }
    const auto hint = query::parse_level_hint(level);
    auto turn = session->turn();
    return json_response(200, session->query(text, hint, k));
  }
  // move
  const auto direction = nav::parse_direction(require_string(body, "direction"));
  if (!body.contains("distance") || !body["distance"].is_number()) throw InvalidInput("missing number field distance");
  const double distance = body["distance"].get<double>();
  auto turn = session->turn();
  return json_response(200, session->move(direction, distance));
}

}  // namespace

HttpResponse handle_request(Service& service, const HttpRequest& request) {
  try {
    return route(service, request);
  } catch (const MethodNotAllowed& e) {
    return json_response(405, {{"error", e.what()}});
  } catch (const InvalidInput& e) {
    return json_response(400, {{"error", e.what()}});
  } catch (const FormatError& e) {
    return json_response(400, {{"error", e.what()}});
  } catch (const NotFound& e) {
    return json_response(404, {{"error", e.what()}});
  } catch (const ProviderError& e) {
    return json_response(502, {{"error", e.what()}});
  } catch (const std::exception& e) {
    return json_response(500, {{"error", e.what()}});
  }
}

std::optional<std::string> stream_session(const std::string& path) {
  const auto t = parse_target(path);
  if (t.segments.size() == 3 && t.segments[0] == "sessions" && t.segments[2] == "stream") return t.segments[1];
  return std::nullopt;
}

}  // namespace mlfield::service
