#pragma once

#include <string>

#include "mlfield/service/session.hpp"

namespace mlfield::service {

struct HttpRequest {
  std::string method;  // upper case
  std::string target;  // path with optional query string
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Routes of the session API:
//   POST /sessions {scene?}                      -> {session_id, scene, pose}
//   POST /sessions/{id}/chat {text}              -> {response, refused, degraded, status, frames, pose, task, stream_url?}
//   POST /sessions/{id}/query {text, level?, k?} -> {results: [{id, label, level, relevancy, path, fell_back, mask_rle}], pose, rendered}
//   POST /sessions/{id}/move {direction, distance} -> {pose}
//   GET  /sessions/{id}/frame?overlay=bool       -> image/png
//   GET  /healthz                                -> {status, sessions}
// The frame stream (GET /sessions/{id}/stream) needs a connection upgrade and
// is served by the HTTP server. Errors are {"error": message} with 400 (bad
// input), 404 (unknown session/scene/route), 405, 502 (provider) or 500.
HttpResponse handle_request(Service& service, const HttpRequest& request);

// Session id when `path` is /sessions/{id}/stream.
std::optional<std::string> stream_session(const std::string& path);

}  // namespace mlfield::service
