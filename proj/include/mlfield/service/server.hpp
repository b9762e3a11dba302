#pragma once

#include <memory>
#include <string>

#include "mlfield/service/session.hpp"

namespace mlfield::service {

// HTTP/1.1 + WebSocket server for the session API. One thread per
// connection; GET /sessions/{id}/stream upgrades to a WebSocket that carries
// the session's frames as binary messages (see encode_stream_message).
class HttpServer {
 public:
  // Binds immediately; port 0 picks a free one. Throws Error when binding fails.
  HttpServer(Service& service, const std::string& bind, int port);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  int port() const;
  // Accepts on a background thread.
  void start();
  // Blocks until stop() is called from another thread (or a signal handler
  // thread).
  void run();
  // Closes the listener and every open connection, then joins their threads.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mlfield::service
