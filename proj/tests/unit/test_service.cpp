#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"
#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/demo/toy_assets.hpp"
#include "mlfield/field/render.hpp"
#include "mlfield/mask/rle.hpp"
#include "mlfield/service/api.hpp"
#include "mlfield/service/server.hpp"
#include "temp_dir.hpp"

// after Eigen and asio: resolv.h defines a _res macro that clashes with Eigen internals
#include <httplib.h>

using namespace mlfield;
using namespace mlfield::service;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 11;
constexpr std::size_t kDim = 64;

// Toy desk artifacts on disk, written once for the whole test binary.
struct DeskFiles {
  TempDir dir;
  ScenePaths paths;
  toy::ToyScene toy;
  DeskFiles() {
    toy = toy::generate(toy::desk_spec());
    paths = demo::write_toy_assets(dir / "desk", toy, semantic::SyntheticProvider(kSeed, kDim));
  }
};

const DeskFiles& desk() {
  static const DeskFiles d;
  return d;
}

ServiceConfig desk_config() {
  ServiceConfig c;
  c.port = 0;
  c.embedding = {"synthetic", "", kSeed, kDim};
  c.scenes["desk"] = desk().paths;
  c.denylist = {"knife"};
  return c;
}

// Server on an ephemeral port plus a client.
struct Running {
  Service service;
  HttpServer server;
  httplib::Client client;
  explicit Running(ServiceConfig c = desk_config())
      : service(std::move(c)), server(service, "127.0.0.1", 0), client("127.0.0.1", server.port()) {
    server.start();
    client.set_read_timeout(60, 0);
  }

  json post(const std::string& path, const json& body, int expect = 200) {
    auto r = client.Post(path, body.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == expect);
    return json::parse(r->body);
  }
  std::string session() { return post("/sessions", json::object(), 201)["session_id"]; }
  Image8 frame(const std::string& id, bool overlay = false) {
    auto r = client.Get("/sessions/" + id + "/frame?overlay=" + (overlay ? "true" : "false"));
    REQUIRE(r);
    REQUIRE(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "image/png");
    return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(r->body.data()), r->body.size()));
  }
};

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;

// Blocking WebSocket client for the frame stream.
struct StreamClient {
  net::io_context ioc;
  websocket::stream<net::ip::tcp::socket> ws{ioc};

  StreamClient(int port, const std::string& path) {
    net::ip::tcp::endpoint ep(net::ip::make_address("127.0.0.1"), static_cast<unsigned short>(port));
    ws.next_layer().connect(ep);
    ws.handshake("127.0.0.1:" + std::to_string(port), path);
  }
  DecodedStreamMessage next() {
    beast::flat_buffer buf;
    ws.read(buf);
    CHECK_FALSE(ws.got_text());
    const auto data = buf.data();
    return decode_stream_message(std::span(static_cast<const std::uint8_t*>(data.data()), data.size()));
  }
};

field::CameraPose pose_of(const json& j) { return field::camera_from_json(j); }

}  // namespace

TEST_CASE("config parsing") {
  const std::string text = R"(
[server]
bind = "0.0.0.0"
port = 9000
session_idle_timeout = 60
denylist = ["knife", "stove top"]

[defaults]
reserving_weight = 0.6
tolerance = 0.03
ssim_weight = 0.3
frames = 90
top_k = 2

[embedding]
mode = "file"
location = "emb.bin"
dim = 128

[decision]
url = "http://localhost:7000/decide"
timeout_ms = 500

[scenes.desk]
scene = "desk/scene.bin"
dictionary = "desk/dictionary.bin"
graph = "/abs/graph.bin"
cameras = "desk/cameras.bin"
)";
  const auto c = parse_config(text, "/etc/mlfield");
  CHECK(c.bind == "0.0.0.0");
  CHECK(c.port == 9000);
  CHECK(c.session_idle_timeout == 60);
  CHECK(c.denylist == std::vector<std::string>{"knife", "stove top"});
  CHECK(c.defaults.reserving_weight == 0.6);
  CHECK(c.defaults.tolerance == 0.03);
  CHECK(c.defaults.ssim_weight == 0.3);
  CHECK(c.defaults.frames == 90);
  CHECK(c.defaults.top_k == 2);
  CHECK(c.embedding.mode == "file");
  CHECK(c.embedding.location == "/etc/mlfield/emb.bin");
  CHECK(c.embedding.dim == 128);
  CHECK(c.decision_url == "http://localhost:7000/decide");
  CHECK(c.decision_timeout_ms == 500);
  REQUIRE(c.scenes.count("desk"));
  CHECK(c.scenes.at("desk").scene == "/etc/mlfield/desk/scene.bin");
  CHECK(c.scenes.at("desk").graph == "/abs/graph.bin");

  const auto defaults = parse_config("");
  CHECK(defaults.port == 8080);
  CHECK(defaults.defaults.frames == 150);
  CHECK(defaults.defaults.reserving_weight == 0.7);
  CHECK(defaults.embedding.mode == "synthetic");

  CHECK_THROWS_AS(parse_config("[server]\nport = \"eighty\""), FormatError);
  CHECK_THROWS_AS(parse_config("[server\nport = 1"), FormatError);
  CHECK_THROWS_AS(parse_config("[server]\nport = 70000"), InvalidInput);
  CHECK_THROWS_AS(parse_config("[defaults]\nreserving_weight = 1.5"), InvalidInput);
  CHECK_THROWS_AS(parse_config("[defaults]\nframes = 0"), InvalidInput);
  CHECK_THROWS_AS(parse_config("[embedding]\nmode = \"http\""), InvalidInput);
  CHECK_THROWS_AS(parse_config("[scenes.a]\nscene = \"x\""), InvalidInput);
  CHECK_THROWS_AS(parse_config("[defaults]\ntolerance = 1"), InvalidInput);
}

TEST_CASE("config environment overrides") {
  std::map<std::string, std::string> env{{"MLFIELD_PORT", "9100"},
                                         {"MLFIELD_DENYLIST", " knife , gun,,"},
                                         {"MLFIELD_FRAMES", "30"},
                                         {"MLFIELD_RESERVING_WEIGHT", "0.5"},
                                         {"MLFIELD_EMBEDDING_SEED", "42"},
                                         {"MLFIELD_DECISION_URL", "http://x/decide"},
                                         {"OTHER_PORT", "1"}};
  const EnvLookup lookup = [&](const std::string& k) -> std::optional<std::string> {
    if (auto it = env.find(k); it != env.end()) return it->second;
    return std::nullopt;
  };
  ServiceConfig c;
  apply_env_overrides(c, lookup);
  CHECK(c.port == 9100);
  CHECK(c.denylist == std::vector<std::string>{"knife", "gun"});
  CHECK(c.defaults.frames == 30);
  CHECK(c.defaults.reserving_weight == 0.5);
  CHECK(c.embedding.seed == 42);
  CHECK(c.decision_url == "http://x/decide");
  CHECK(c.bind == "127.0.0.1");

  env = {{"MLFIELD_PORT", "12ab"}};
  CHECK_THROWS_AS(apply_env_overrides(c, lookup), InvalidInput);
  env = {{"MLFIELD_TOP_K", "0"}};
  CHECK_THROWS_AS(apply_env_overrides(c, lookup), InvalidInput);
}

TEST_CASE("stream messages and overlays") {
  const std::vector<std::uint8_t> png{1, 2, 3};
  const auto m = encode_stream_message(7, 151, png);
  REQUIRE(m->size() == 11);
  CHECK((*m)[0] == 7);
  CHECK((*m)[4] == 151);
  const auto d = decode_stream_message(*m);
  CHECK(d.seq == 7);
  CHECK(d.total == 151);
  CHECK(d.png == png);
  CHECK_THROWS_AS(decode_stream_message(std::span(m->data(), 5)), FormatError);

  FeatureImage f(2, 1);
  f.set_pixel(0, 0, {1.0, 0.5, -1.0});
  f.set_pixel(1, 0, {0.2, 2.0, 0.0});
  auto img = visualize(f);
  CHECK(img.data == std::vector<std::uint8_t>{255, 128, 0, 51, 255, 0});
  BinaryRaster mask(2, 1, 0);
  mask(1, 0) = 1;
  overlay_mask(img, mask);
  CHECK(img.data == std::vector<std::uint8_t>{255, 128, 0, 153, 128, 0});
  CHECK_THROWS_AS(overlay_mask(img, BinaryRaster(3, 1, 0)), InvalidInput);
}

TEST_CASE("ticket lock serves waiters in arrival order") {
  TicketLock lock;
  std::vector<int> order;
  std::mutex order_mu;
  lock.lock();
  std::vector<std::thread> threads;
  for (int i = 0; i < 5; ++i) {
    threads.emplace_back([&, i] {
      std::lock_guard g(lock);
      std::lock_guard o(order_mu);
      order.push_back(i);
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(30));  // let thread i queue up first
  }
  lock.unlock();
  for (auto& t : threads) t.join();
  CHECK(order == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("frame channel") {
  FrameChannel ch;
  int notified = 0;
  ch.set_notify([&] { ++notified; });
  ch.push(encode_stream_message(0, 1, {}));
  CHECK(notified == 1);
  CHECK(ch.pop(std::chrono::milliseconds(1)).has_value());
  CHECK_FALSE(ch.pop(std::chrono::milliseconds(1)).has_value());
  ch.close();
  CHECK(ch.closed());
  ch.push(encode_stream_message(1, 1, {}));
  CHECK_FALSE(ch.try_pop().has_value());
}

TEST_CASE("service sessions and persistence") {
  const auto& d = desk();
  Service service(desk_config());
  auto a = service.create_session();
  auto b = service.create_session("desk");
  CHECK(a->id() != b->id());
  CHECK(a->pose() == d.toy.cameras[0]);
  CHECK(service.find(a->id()) == a);
  CHECK_THROWS_AS(service.find("nope"), NotFound);
  CHECK_THROWS_AS(service.create_session("garden"), NotFound);
  // sessions on one scene share its data
  CHECK(&a->assets() == &b->assets());

  auto broken = desk_config();
  broken.scenes["broken"] = d.paths;
  broken.scenes["broken"].dictionary = d.dir / "missing.bin";
  Service s2(broken);
  CHECK_THROWS_AS(s2.create_session("broken"), NotFound);
  CHECK_NOTHROW(s2.create_session("desk"));

  // artifacts re-serialize to the bytes on disk
  const auto assets = load_assets("desk", d.paths);
  CHECK(field::serialize_scene(*assets.scene) == read_file_bytes(d.paths.scene));
  CHECK(semantic::serialize_dictionary(*assets.dictionary) == read_file_bytes(d.paths.dictionary));
  CHECK(nav::serialize_graph(*assets.graph) == read_file_bytes(d.paths.graph));
  CHECK(field::serialize_cameras(assets.cameras) == read_file_bytes(d.paths.cameras));

  auto expiring = desk_config();
  expiring.session_idle_timeout = 1;
  Service s3(expiring);
  s3.create_session();
  s3.create_session();
  CHECK(s3.expire_idle(std::chrono::steady_clock::now()) == 0);
  CHECK(s3.expire_idle(std::chrono::steady_clock::now() + std::chrono::seconds(5)) == 2);
  CHECK(s3.session_count() == 0);
}

TEST_CASE("http api: health, errors and frames") {
  Running rt;
  auto health = rt.client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");

  const auto id = rt.session();
  CHECK(id.size() == 16);

  CHECK(rt.post("/sessions/nope/chat", {{"text", "hi"}}, 404).contains("error"));
  CHECK(rt.post("/sessions", {{"scene", "garden"}}, 404).contains("error"));
  CHECK(rt.post("/sessions/" + id + "/move", {{"direction", "sideways"}, {"distance", 1}}, 400).contains("error"));
  CHECK(rt.post("/sessions/" + id + "/move", {{"direction", "up"}, {"distance", -1}}, 400).contains("error"));
  CHECK(rt.post("/sessions/" + id + "/query", {{"text", "mug"}, {"k", 0}}, 400).contains("error"));
  CHECK(rt.post("/sessions/" + id + "/query", {{"text", "mug"}, {"level", "atom"}}, 400).contains("error"));
  CHECK(rt.post("/sessions/" + id + "/chat", json::object(), 400).contains("error"));
  auto bad = rt.client.Post("/sessions/" + id + "/chat", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto wrong = rt.client.Get("/sessions/" + id + "/chat");
  REQUIRE(wrong);
  CHECK(wrong->status == 405);
  auto nothing = rt.client.Get("/elsewhere");
  REQUIRE(nothing);
  CHECK(nothing->status == 404);

  // fresh session renders training camera 0
  const auto& cam = desk().toy.cameras[0];
  const auto img = rt.frame(id);
  CHECK(img.width == cam.width);
  CHECK(img.height == cam.height);
  const auto expect = visualize(
      field::render_feature_frame(*load_assets("desk", desk().paths).scene, cam, semantic::TargetLevel::Object)
          .features);
  CHECK(img == expect);
  CHECK(rt.frame(id) == img);

  const auto moved = rt.post("/sessions/" + id + "/move", {{"direction", "forward"}, {"distance", 0.5}});
  const auto pose = pose_of(moved["pose"]);
  CHECK((pose.translation - (cam.translation + 0.5 * cam.rotation.col(2))).norm() <= 1e-12);
  CHECK_FALSE(rt.frame(id) == img);
}

TEST_CASE("http api: queries reuse the cached frame") {
  Running rt;
  const auto id = rt.session();
  const auto first = rt.post("/sessions/" + id + "/query", {{"text", "mug"}});
  CHECK(first["rendered"] == true);
  REQUIRE(first["results"].size() == 1);
  const auto& r = first["results"][0];
  CHECK(r["label"] == "mug");
  CHECK(r["level"] == "object");
  const mask::Rle rle{r["mask_rle"]["width"], r["mask_rle"]["height"], r["mask_rle"]["counts"]};
  const auto mask = mask::rle_decode(rle);
  std::size_t on = 0;
  for (std::size_t p = 0; p < mask.size(); ++p) on += mask[p];
  CHECK(on > 0);

  const auto before = field::render_invocations();
  const auto again = rt.post("/sessions/" + id + "/query", {{"text", "mug"}});
  CHECK(again["rendered"] == false);
  CHECK(again["results"] == first["results"]);
  const auto other = rt.post("/sessions/" + id + "/query", {{"text", "a purple zebra"}, {"k", 2}});
  CHECK(other["rendered"] == false);
  CHECK(other["results"].size() >= 1);
  CHECK(field::render_invocations() == before);

  // overlay marks exactly the mask pixels of the last query
  rt.post("/sessions/" + id + "/query", {{"text", "mug"}});
  const auto plain = rt.frame(id, false);
  const auto over = rt.frame(id, true);
  CHECK(field::render_invocations() == before);
  std::size_t changed_outside = 0, wrong_inside = 0;
  for (std::size_t p = 0; p < mask.size(); ++p)
    for (int c = 0; c < 3; ++c) {
      const int a = plain.data[p * 3 + c], b = over.data[p * 3 + c];
      if (!mask[p]) changed_outside += a != b;
      else wrong_inside += b != (a + (c == 0 ? 255 : 0) + 1) / 2;
    }
  CHECK(changed_outside == 0);
  CHECK(wrong_inside == 0);

  // moving invalidates the overlay and the cache
  rt.post("/sessions/" + id + "/move", {{"direction", "left"}, {"distance", 0.2}});
  CHECK(rt.frame(id, true) == rt.frame(id, false));
  CHECK(rt.post("/sessions/" + id + "/query", {{"text", "mug"}})["results"][0]["mask_rle"] != r["mask_rle"]);
}

TEST_CASE("http api: chat streams the navigation frames") {
  Running rt;
  const auto id = rt.session();
  StreamClient stream(rt.server.port(), "/sessions/" + id + "/stream");

  const auto reply = rt.post("/sessions/" + id + "/chat", {{"text", "find the mug"}});
  INFO(reply.dump(2));
  CHECK(reply["status"] == "completed");
  CHECK(reply["response"].get<std::string>().find("mug") != std::string::npos);
  CHECK(reply["frames"] == 151);
  CHECK(reply["stream_url"] == "/sessions/" + id + "/stream");

  std::vector<DecodedStreamMessage> frames;
  for (int i = 0; i < 151; ++i) frames.push_back(stream.next());
  for (int i = 0; i < 151; ++i) {
    CHECK(frames[i].seq == std::uint32_t(i));
    CHECK(frames[i].total == 151u);
  }
  // the last streamed frame is the session's current view
  CHECK(decode_png(frames.back().png) == rt.frame(id));
  // and it looks at the target
  const auto pose = pose_of(reply["pose"]);
  const auto& target = reply["task"]["subtasks"][1]["feedback"]["target_position"];
  const auto c = pose.to_camera(Eigen::Vector3d(target[0], target[1], target[2]));
  REQUIRE(c.z() > 0);
  const double u = pose.fx * c.x() / c.z() + pose.cx, v = pose.fy * c.y() / c.z() + pose.cy;
  CHECK(u >= 0);
  CHECK(u <= pose.width - 1);
  CHECK(v >= 0);
  CHECK(v <= pose.height - 1);

  // a late subscriber receives the buffered sequence
  StreamClient late(rt.server.port(), "/sessions/" + id + "/stream");
  for (int i = 0; i < 151; ++i) CHECK(late.next().seq == std::uint32_t(i));

  // a plain move renders nothing, so the chat reply carries no stream
  const auto moved = rt.post("/sessions/" + id + "/chat", {{"text", "move up 0.1"}});
  CHECK(moved["frames"] == 1);
  CHECK(stream.next().total == 1u);

  const auto refused = rt.post("/sessions/" + id + "/chat", {{"text", "go to the knife"}});
  CHECK(refused["refused"] == true);
  CHECK(refused["status"] == "refused");
  CHECK(refused["frames"] == 0);
  CHECK_FALSE(refused.contains("stream_url"));
  CHECK(pose_of(refused["pose"]) == pose_of(moved["pose"]));

  auto unknown = rt.client.Get("/sessions/nope/stream");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  CHECK_THROWS(StreamClient(rt.server.port(), "/sessions/nope/stream"));
}

TEST_CASE("http api: degraded decision model") {
  auto c = desk_config();
  c.decision_url = "http://127.0.0.1:9/decide";  // discard port, nothing listens
  c.decision_timeout_ms = 300;
  Running rt(c);
  const auto id = rt.session();
  const auto reply = rt.post("/sessions/" + id + "/chat", {{"text", "move forward 0.5"}});
  CHECK(reply["degraded"] == true);
  CHECK(reply["status"] == "completed");
}

TEST_CASE("http api: sessions are isolated and deterministic") {
  const std::vector<std::vector<json>> scripts = {
      {{{"path", "chat"}, {"body", {{"text", "find the lamp"}}}},
       {{"path", "query"}, {"body", {{"text", "shade"}, {"level", "part"}}}},
       {{"path", "move"}, {"body", {{"direction", "back"}, {"distance", 0.3}}}},
       {{"path", "chat"}, {"body", {{"text", "find the apple"}}}}},
      {{{"path", "move"}, {"body", {{"direction", "right"}, {"distance", 0.4}}}},
       {{"path", "chat"}, {"body", {{"text", "find the game controller"}}}},
       {{"path", "chat"}, {"body", {{"text", "show me its button"}}}},
       {{"path", "query"}, {"body", {{"text", "button"}, {"k", 2}}}}},
  };
  auto replay = [](Running& rt, const std::string& id, const std::vector<json>& script) {
    json out = json::array();
    for (const auto& step : script) {
      auto r = rt.post("/sessions/" + id + "/" + step["path"].get<std::string>(), step["body"]);
      r.erase("rendered");  // depends on what else ran at the same pose
      out.push_back(r);
    }
    return out.dump();
  };

  auto config = desk_config();
  config.defaults.frames = 10;
  std::vector<std::string> reference;
  {
    Running rt(config);
    for (const auto& s : scripts) reference.push_back(replay(rt, rt.session(), s));
  }
  Running rt(config);
  std::vector<std::string> ids{rt.session(), rt.session()};
  std::vector<std::string> got(2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 2; ++i)
    threads.emplace_back([&, i] {
      Running* r = &rt;
      httplib::Client own("127.0.0.1", r->server.port());
      own.set_read_timeout(60, 0);
      json out = json::array();
      for (const auto& step : scripts[i]) {
        auto res = own.Post("/sessions/" + ids[i] + "/" + step["path"].get<std::string>(), step["body"].dump(),
                            "application/json");
        if (!res) return;
        auto j = json::parse(res->body);
        j.erase("rendered");
        out.push_back(j);
      }
      got[i] = out.dump();
    });
  for (auto& t : threads) t.join();
  CHECK(got[0] == reference[0]);
  CHECK(got[1] == reference[1]);
}

TEST_CASE("server stops with open connections") {
  auto rt = std::make_unique<Running>();
  const auto id = rt->session();
  StreamClient stream(rt->server.port(), "/sessions/" + id + "/stream");
  httplib::Client idle("127.0.0.1", rt->server.port());
  idle.set_keep_alive(true);
  REQUIRE(idle.Get("/healthz"));
  rt->server.stop();
  beast::flat_buffer buf;
  beast::error_code ec;
  stream.ws.read(buf, ec);
  CHECK(ec);
  rt.reset();
}
