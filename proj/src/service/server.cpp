#include "mlfield/service/server.hpp"

#include <sys/socket.h>

#include <atomic>
#include <list>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "mlfield/common/error.hpp"
#include "mlfield/service/api.hpp"

namespace mlfield::service {
namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

// One accepted connection. Lives on its own io_context so the WebSocket phase
// can run full duplex without touching other connections.
struct Connection : std::enable_shared_from_this<Connection> {
  net::io_context ioc;
  tcp::socket socket{ioc};
  std::atomic<bool> finished{false};
  std::shared_ptr<FrameChannel> channel;  // set in stream mode
  std::mutex mu;

  // Unblocks any pending sync or async operation from another thread.
  void abort() {
    std::shared_ptr<FrameChannel> ch;
    {
      std::lock_guard lk(mu);
      ch = channel;
      if (socket.is_open()) ::shutdown(socket.native_handle(), SHUT_RDWR);
    }
    if (ch) ch->close();
  }
};

class StreamWriter : public std::enable_shared_from_this<StreamWriter> {
 public:
  StreamWriter(std::shared_ptr<Connection> conn, std::shared_ptr<FrameChannel> channel)
      : conn_(std::move(conn)), channel_(std::move(channel)), ws_(conn_->socket) {}

  void run(const http::request<http::string_body>& req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.accept(req);
    ws_.binary(true);
    std::weak_ptr<StreamWriter> weak = shared_from_this();
    channel_->set_notify([weak] {
      if (auto self = weak.lock()) net::post(self->conn_->ioc, [self] { self->pump(); });
    });
    read();
    pump();
    conn_->ioc.run();
    channel_->set_notify(nullptr);
    channel_->close();
  }

 private:
  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->done_ = true;
        self->channel_->close();
        return;
      }
      self->in_.consume(self->in_.size());  // clients have nothing to say
      self->read();
    });
  }

  void pump() {
    if (writing_ || done_) return;
    auto m = channel_->try_pop();
    if (!m) {
      if (channel_->closed() && !done_) {
        done_ = true;
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
      }
      return;
    }
    writing_ = true;
    ws_.async_write(net::buffer(**m), [self = shared_from_this(), m](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->done_ = true;
        self->channel_->close();
        return;
      }
      self->pump();
    });
  }

  std::shared_ptr<Connection> conn_;
  std::shared_ptr<FrameChannel> channel_;
  websocket::stream<tcp::socket&> ws_;
  beast::flat_buffer in_;
  bool writing_ = false;
  bool done_ = false;
};

http::response<http::string_body> to_beast(const HttpResponse& r, unsigned version, bool keep_alive) {
  http::response<http::string_body> res{static_cast<http::status>(r.status), version};
  res.set(http::field::content_type, r.content_type);
  res.set(http::field::server, "mlfield");
  res.keep_alive(keep_alive);
  res.body() = r.body;
  res.prepare_payload();
  return res;
}

void serve_connection(Service& service, const std::shared_ptr<Connection>& conn) {
  beast::flat_buffer buffer;
  beast::error_code ec;
  for (;;) {
    http::request<http::string_body> req;
    http::read(conn->socket, buffer, req, ec);
    if (ec) break;

    if (websocket::is_upgrade(req)) {
      const auto id = stream_session(std::string(req.target()));
      std::shared_ptr<Session> session;
      HttpResponse error;
      if (!id) error = {404, "application/json", R"({"error":"only session streams accept upgrades"})"};
      else {
        try {
          session = service.find(*id);
        } catch (const NotFound& e) {
          error = {404, "application/json", nlohmann::json{{"error", e.what()}}.dump()};
        }
      }
      if (!session) {
        http::write(conn->socket, to_beast(error, req.version(), false), ec);
        break;
      }
      auto channel = session->subscribe();
      session.reset();  // the stream must not keep an expired session alive
      {
        std::lock_guard lk(conn->mu);
        conn->channel = channel;
      }
      if (conn->finished) break;
      try {
        std::make_shared<StreamWriter>(conn, channel)->run(req);
      } catch (const std::exception&) {
        channel->close();
      }
      break;
    }

    HttpRequest r{std::string(req.method_string()), std::string(req.target()), req.body()};
    const auto res = handle_request(service, r);
    http::write(conn->socket, to_beast(res, req.version(), req.keep_alive()), ec);
    if (ec || !req.keep_alive()) break;
  }
  conn->socket.shutdown(tcp::socket::shutdown_send, ec);
}

}  // namespace

struct HttpServer::Impl {
  Service& service;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread accept_thread;
  std::mutex mu;
  struct Live {
    std::shared_ptr<Connection> conn;
    std::thread thread;
  };
  std::list<Live> live;
  std::atomic<bool> stopping{false};
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopped = false;

  explicit Impl(Service& s) : service(s) {}

  void reap() {
    std::list<Live> dead;
    {
      std::lock_guard lk(mu);
      for (auto it = live.begin(); it != live.end();)
        if (it->conn->finished) dead.splice(dead.end(), live, it++);
        else ++it;
    }
    for (auto& d : dead) d.thread.join();
  }

  void accept_loop() {
    while (!stopping) {
      auto conn = std::make_shared<Connection>();
      beast::error_code ec;
      acceptor.accept(conn->socket, ec);
      if (ec) {
        if (stopping) break;
        continue;
      }
      reap();
      std::lock_guard lk(mu);
      if (stopping) break;
      live.push_back({conn, std::thread([this, conn] {
                        try {
                          serve_connection(service, conn);
                        } catch (const std::exception&) {
                        }
                        conn->finished = true;
                      })});
    }
  }
};

HttpServer::HttpServer(Service& service, const std::string& bind, int port) : impl_(std::make_unique<Impl>(service)) {
  try {
    const tcp::endpoint ep(net::ip::make_address(bind), static_cast<unsigned short>(port));
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
  } catch (const std::exception& e) {
    throw Error("cannot listen on " + bind + ":" + std::to_string(port) + ": " + e.what());
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void HttpServer::start() {
  if (impl_->accept_thread.joinable()) return;
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void HttpServer::run() {
  start();
  std::unique_lock lk(impl_->stop_mu);
  impl_->stop_cv.wait(lk, [&] { return impl_->stopped; });
}

void HttpServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  {
    beast::error_code ec;
    ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
    impl_->acceptor.close(ec);
  }
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  std::list<Impl::Live> all;
  {
    std::lock_guard lk(impl_->mu);
    all.swap(impl_->live);
  }
  for (auto& l : all) {
    l.conn->finished = true;
    l.conn->abort();
    net::post(l.conn->ioc, [c = l.conn] { c->ioc.stop(); });
  }
  for (auto& l : all) l.thread.join();
  {
    std::lock_guard lk(impl_->stop_mu);
    impl_->stopped = true;
  }
  impl_->stop_cv.notify_all();
}

}  // namespace mlfield::service
