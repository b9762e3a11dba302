// mlfield command line: offline pipeline steps, navigation utilities, the
// agent REPL and the session service.
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mlfield/agent/agent.hpp"
#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/common/png.hpp"
#include "mlfield/demo/toy_assets.hpp"
#include "mlfield/field/optimize.hpp"
#include "mlfield/field/render.hpp"
#include "mlfield/mask/io.hpp"
#include "mlfield/mask/pipeline.hpp"
#include "mlfield/mask/rle.hpp"
#include "mlfield/nav/graph.hpp"
#include "mlfield/nav/motion.hpp"
#include "mlfield/semantic/gt_frames.hpp"
#include "mlfield/service/server.hpp"

using namespace mlfield;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ProviderArgs {
  std::string mode = "synthetic";
  std::string location;
  std::uint64_t seed = 0;
  std::size_t dim = semantic::kDefaultEmbeddingDim;

  void add(CLI::App* app) {
    app->add_option("--provider", mode, "synthetic, file or http")->check(CLI::IsMember({"synthetic", "file", "http"}));
    app->add_option("--provider-location", location, "embedding file or endpoint URL");
    app->add_option("--seed", seed, "synthetic provider seed");
    app->add_option("--dim", dim, "embedding dimension");
  }
  std::unique_ptr<semantic::EmbeddingProvider> make() const {
    return semantic::make_provider({mode, location, seed, dim});
  }
};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw NotFound("cannot open " + p.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError(p.string() + " is not valid JSON");
  return j;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

// Binary camera file, a single camera JSON object or a JSON array of them.
std::vector<field::CameraPose> read_camera_list(const fs::path& p) {
  if (p.extension() != ".json") return field::read_cameras(p);
  const auto j = read_json(p);
  std::vector<field::CameraPose> out;
  if (j.is_array())
    for (const auto& c : j) out.push_back(field::camera_from_json(c));
  else
    out.push_back(field::camera_from_json(j));
  return out;
}

field::Scene read_any_scene(const fs::path& p) {
  return p.extension() == ".ply" ? field::import_splat_ply(p) : field::read_scene(p);
}

service::ServiceConfig service_config(const std::string& path) {
  auto c = path.empty() ? service::ServiceConfig{} : service::load_config(path);
  service::apply_env_overrides(c, service::process_environment());
  return c;
}

std::string toml_path(const fs::path& p) {
  std::string s = p.string(), out;
  for (char c : s) {
    if (c == '\\' || c == '"') out += '\\';
    out += c;
  }
  return "\"" + out + "\"";
}

// Blocks until SIGINT or SIGTERM. Signals must already be blocked in every thread.
void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

void block_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

int serve(const service::ServiceConfig& config) {
  block_signals();
  service::Service svc(config);
  service::HttpServer server(svc, config.bind, config.port);
  server.start();
  std::cout << "listening on http://" << config.bind << ":" << server.port() << std::endl;
  wait_for_signal();
  std::cout << "shutting down" << std::endl;
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-embedded Gaussian field tools: masks, dictionary, training, queries, navigation, agent"};
  app.require_subcommand(1);

  // extract
  auto* extract = app.add_subcommand("extract", "filter raw candidate masks of one frame into an object/part hierarchy");
  std::string cand_path, hierarchy_out;
  double rho = 0.25;
  extract->add_option("--candidates", cand_path, "frame candidates JSON")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", hierarchy_out, "hierarchy JSON")->required();
  extract->add_option("--hollow-ratio", rho, "hole share above which a part mask is dropped");

  // map
  auto* map = app.add_subcommand("map", "embed hierarchy targets and build the mapping dictionary");
  std::string map_hierarchy, map_out, map_config;
  std::optional<double> map_w, map_t;
  ProviderArgs map_provider;
  map->add_option("--hierarchy", map_hierarchy, "hierarchy JSON")->required()->check(CLI::ExistingFile);
  map->add_option("--out", map_out, "dictionary file")->required();
  map->add_option("-w,--reserving-weight", map_w, "semantic deviation weight (default 0.7)");
  map->add_option("-t,--tolerance", map_t, "channel tolerance (default 0.02)");
  map->add_option("--config", map_config, "service config providing defaults");
  map_provider.add(map);

  // gt
  auto* gt = app.add_subcommand("gt", "ground-truth feature frames from propagated identities");
  std::string gt_prop, gt_hierarchy, gt_dict, gt_out;
  gt->add_option("--propagation", gt_prop, "identity propagation JSON")->required()->check(CLI::ExistingFile);
  gt->add_option("--hierarchy", gt_hierarchy, "hierarchy JSON")->required()->check(CLI::ExistingFile);
  gt->add_option("--dictionary", gt_dict, "dictionary file")->required()->check(CLI::ExistingFile);
  gt->add_option("--out", gt_out, "GT frames file")->required();

  // train
  auto* train = app.add_subcommand("train", "optimize per-Gaussian codes against GT feature frames");
  std::string tr_scene, tr_cams, tr_gt, tr_out, tr_config;
  field::TrainConfig tr_cfg;
  std::optional<double> tr_lambda;
  train->add_option("--scene", tr_scene, "Gaussians (.ply or native)")->required()->check(CLI::ExistingFile);
  train->add_option("--cameras", tr_cams, "cameras (binary or JSON), one per GT frame")->required()->check(CLI::ExistingFile);
  train->add_option("--gt", tr_gt, "GT frames file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr_out, "trained scene file")->required();
  train->add_option("--iterations", tr_cfg.iterations, "optimizer steps");
  train->add_option("--lr", tr_cfg.learning_rate, "Adam step size");
  train->add_option("--lambda", tr_lambda, "D-SSIM weight (default 0.2)");
  train->add_option("--config", tr_config, "service config providing defaults");

  // query
  auto* query = app.add_subcommand("query", "render a view and decode the mask of a text query");
  std::string q_scene, q_dict, q_cam, q_text, q_level = "auto", q_out;
  int q_k = 1;
  ProviderArgs q_provider;
  query->add_option("--scene", q_scene, "trained scene")->required()->check(CLI::ExistingFile);
  query->add_option("--dictionary", q_dict, "dictionary file")->required()->check(CLI::ExistingFile);
  query->add_option("--camera", q_cam, "camera JSON")->required()->check(CLI::ExistingFile);
  query->add_option("--text", q_text, "query text")->required();
  query->add_option("--level", q_level, "object, part or auto");
  query->add_option("-k", q_k, "number of targets")->check(CLI::PositiveNumber);
  query->add_option("--out", q_out, "mask PNG (a .json sidecar is written next to it)")->required();
  q_provider.add(query);

  // nav
  auto* nav_cmd = app.add_subcommand("nav", "keypoint graph tools");
  nav_cmd->require_subcommand(1);
  auto* build_graph = nav_cmd->add_subcommand("build-graph", "dilate training cameras and connect visible keypoints");
  std::string g_scene, g_cams, g_out;
  std::optional<double> g_step;
  build_graph->add_option("--scene", g_scene, "trained scene")->required()->check(CLI::ExistingFile);
  build_graph->add_option("--cameras", g_cams, "training cameras")->required()->check(CLI::ExistingFile);
  build_graph->add_option("--out", g_out, "graph file")->required();
  build_graph->add_option("--step", g_step, "dilation step (default: mean adjacent camera spacing)");
  auto* path_cmd = nav_cmd->add_subcommand("path", "shortest keypoint path and interpolated poses");
  std::string p_graph, p_cams;
  std::uint32_t p_from = 0, p_to = 0;
  int p_frames = nav::kDefaultFrameCount;
  bool p_poses = false;
  path_cmd->add_option("--graph", p_graph, "graph file")->required()->check(CLI::ExistingFile);
  path_cmd->add_option("--from", p_from, "start node")->required();
  path_cmd->add_option("--to", p_to, "goal node")->required();
  path_cmd->add_option("--frames", p_frames, "interpolated frame count M")->check(CLI::PositiveNumber);
  path_cmd->add_option("--cameras", p_cams, "cameras providing intrinsics for --poses");
  path_cmd->add_flag("--poses", p_poses, "also print the M+1 interpolated poses");

  // agent
  auto* agent_cmd = app.add_subcommand("agent", "agent tools");
  agent_cmd->require_subcommand(1);
  auto* repl = agent_cmd->add_subcommand("repl", "chat with the agent on a configured scene (one command per line)");
  std::string r_config, r_scene, r_transcript;
  repl->add_option("--config", r_config, "service config")->required()->check(CLI::ExistingFile);
  repl->add_option("--scene", r_scene, "scene name (default: first configured)");
  repl->add_option("--transcript", r_transcript, "write the task states as JSON on exit");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the session service (HTTP + WebSocket frame stream)");
  std::string s_config;
  serve_cmd->add_option("--config", s_config, "service config (TOML)")->check(CLI::ExistingFile);

  // demo
  auto* demo_cmd = app.add_subcommand("demo", "write a navigable toy desk scene and a config for it");
  std::string d_out;
  bool d_train = false, d_serve = false, d_inputs = false;
  int d_port = 8080;
  demo_cmd->add_option("--out", d_out, "output directory")->required();
  demo_cmd->add_flag("--train", d_train, "optimize the features instead of painting the codes");
  demo_cmd->add_flag("--serve", d_serve, "serve the scene afterwards");
  demo_cmd->add_option("--port", d_port, "port written to the config");
  demo_cmd->add_flag("--export-inputs", d_inputs, "also write raw pipeline inputs under <out>/inputs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract->parsed()) {
      const auto frame = mask::read_frame_candidates(cand_path);
      mask::HollowConfig hollow;
      hollow.rho = rho;
      const auto h = mask::extract_hierarchy(frame, hollow);
      mask::write_hierarchy(hierarchy_out, h);
      std::cout << h.objects.size() << " objects, " << h.parts.size() << " parts -> " << hierarchy_out << "\n";
    } else if (map->parsed()) {
      const auto defaults = service_config(map_config).defaults;
      const auto h = mask::read_hierarchy(map_hierarchy);
      const auto provider = map_provider.make();
      const auto dict = semantic::build_mapping_dictionary(h, semantic::embed_hierarchy(h, *provider),
                                                           map_w.value_or(defaults.reserving_weight),
                                                           map_t.value_or(defaults.tolerance));
      semantic::write_dictionary(map_out, dict);
      std::cout << dict.records.size() << " targets, " << fs::file_size(map_out) << " bytes -> " << map_out << "\n";
    } else if (gt->parsed()) {
      const auto prop = semantic::read_propagation(gt_prop);
      const auto h = mask::read_hierarchy(gt_hierarchy);
      const auto dict = semantic::read_dictionary(gt_dict);
      const auto frames = semantic::ingest_identity_frames(prop.frames, h, prop.masks);
      const auto gts = semantic::generate_gt_feature_frames(frames, dict);
      semantic::write_gt_frames(gt_out, gts);
      std::cout << gts.size() << " frames -> " << gt_out << "\n";
    } else if (train->parsed()) {
      tr_cfg.loss.lambda = tr_lambda.value_or(service_config(tr_config).defaults.ssim_weight);
      auto scene = read_any_scene(tr_scene);
      const auto cams = read_camera_list(tr_cams);
      const auto gts = semantic::read_gt_frames(tr_gt);
      if (cams.size() != gts.size())
        throw InvalidInput(std::to_string(cams.size()) + " cameras for " + std::to_string(gts.size()) + " GT frames");
      std::vector<field::TrainingView> views;
      for (std::size_t i = 0; i < cams.size(); ++i) views.push_back({cams[i], gts[i].object, gts[i].part});
      tr_cfg.progress = [](int it, double loss) { std::cout << "iter " << it << " loss " << loss << "\n"; };
      const auto report = field::optimize_features(scene, views, tr_cfg);
      field::write_scene(tr_out, scene);
      std::cout << report.iterations << " iterations, final losses " << report.final_object_loss << " / "
                << report.final_part_loss << " -> " << tr_out << "\n";
    } else if (query->parsed()) {
      std::shared_ptr<const semantic::EmbeddingProvider> provider = q_provider.make();
      query::QueryEngine engine(semantic::read_dictionary(q_dict), field::read_scene(q_scene), provider);
      engine.set_view(field::read_camera_json(q_cam));
      const auto results = engine.query(q_text, query::parse_level_hint(q_level), q_k);
      json sidecar = {{"text", q_text}, {"results", json::array()}};
      BinaryRaster merged(engine.frames().object.camera.width, engine.frames().object.camera.height, 0);
      for (const auto& r : results) {
        const auto& rec = engine.dictionary().at(r.target.target_id);
        const auto rle = mask::rle_encode(r.mask);
        std::size_t pixels = 0;
        for (std::size_t p = 0; p < r.mask.size(); ++p) {
          pixels += r.mask[p];
          merged[p] |= r.mask[p];
        }
        sidecar["results"].push_back({{"id", r.target.target_id},
                                      {"label", rec.label ? json(*rec.label) : json(nullptr)},
                                      {"level", semantic::to_string(r.target.level)},
                                      {"relevancy", r.target.relevancy},
                                      {"path", query::to_string(r.target.path)},
                                      {"fell_back", r.target.fell_back},
                                      {"pixels", pixels},
                                      {"mask_rle", {{"width", rle.width}, {"height", rle.height}, {"counts", rle.counts}}}});
      }
      write_file_bytes(q_out, encode_mask_png(merged));
      fs::path side(q_out);
      side.replace_extension(".json");
      write_json(side, sidecar);
      std::cout << sidecar.dump(2) << "\n";
    } else if (build_graph->parsed()) {
      const auto scene = field::read_scene(g_scene);
      const auto cams = read_camera_list(g_cams);
      auto g = nav::dilate_keypoints(cams, g_step);
      nav::build_edges(g, [&](const field::CameraPose& c) { return field::render_depth(scene, c); }, cams.front());
      nav::write_graph(g_out, g);
      std::cout << g.size() << " nodes, " << g.edges.size() << " edges, step " << g.step << " -> " << g_out << "\n";
    } else if (path_cmd->parsed()) {
      const auto g = nav::read_graph(p_graph);
      const auto p = nav::shortest_path(g, p_from, p_to);
      if (!p) {
        std::cout << json{{"reachable", false}}.dump(2) << "\n";
        return 3;
      }
      json out = {{"reachable", true}, {"keypoints", p->keypoints}, {"length", p->total_length}};
      if (p_poses) {
        field::CameraPose like = p_cams.empty() ? field::CameraPose{} : read_camera_list(p_cams).front();
        if (p_cams.empty()) {
          like.fx = like.fy = 100;
          like.cx = like.cy = 50;
          like.width = like.height = 100;
        }
        const auto keys = nav::keypoint_poses(g, *p, like);
        json poses = json::array();
        for (const auto& c : nav::interpolate_path(keys, p_frames)) poses.push_back(field::camera_to_json(c));
        out["poses"] = poses;
      }
      std::cout << out.dump(2) << "\n";
    } else if (repl->parsed()) {
      const auto config = service_config(r_config);
      service::Service svc(config);
      auto session = svc.create_session(r_scene);
      std::cout << "scene " << session->assets().name << ", " << session->assets().dictionary->records.size()
                << " targets. Type a command, empty line or EOF to quit.\n";
      std::string line;
      while (std::cout << "> " << std::flush, std::getline(std::cin, line) && !line.empty()) {
        auto turn = session->turn();
        const auto reply = session->chat(line);
        std::cout << (reply["refused"].get<bool>() ? "[refused] " : "")
                  << (reply["degraded"].get<bool>() ? "[degraded] " : "") << reply["response"].get<std::string>();
        if (reply["frames"].get<int>() > 0) std::cout << " (" << reply["frames"] << " frames)";
        std::cout << "\n";
      }
      if (!r_transcript.empty()) {
        auto turn = session->turn();
        json all = json::array();
        for (const auto& t : session->tasks()) all.push_back(agent::to_json(t));
        write_json(r_transcript, all);
      }
    } else if (serve_cmd->parsed()) {
      return serve(service_config(s_config));
    } else if (demo_cmd->parsed()) {
      const fs::path dir(d_out);
      const auto spec = toy::desk_spec();
      semantic::SyntheticProvider provider(0, 64);
      std::cout << "generating toy desk" << (d_train ? " (training features, this takes a while)" : "") << "...\n";
      auto toy_scene = toy::generate(spec);
      if (d_inputs) demo::write_pipeline_inputs(dir / "inputs", toy_scene);
      const auto paths = demo::write_toy_assets(dir / "desk", std::move(toy_scene), provider, {.train = d_train});
      std::ofstream cfg(dir / "service.toml");
      cfg << "[server]\nbind = \"127.0.0.1\"\nport = " << d_port
          << "\ndenylist = [\"knife\"]\n\n[embedding]\nmode = \"synthetic\"\nseed = 0\ndim = 64\n\n[scenes.desk]\n"
          << "scene = " << toml_path(fs::relative(paths.scene, dir)) << "\n"
          << "dictionary = " << toml_path(fs::relative(paths.dictionary, dir)) << "\n"
          << "graph = " << toml_path(fs::relative(paths.graph, dir)) << "\n"
          << "cameras = " << toml_path(fs::relative(paths.cameras, dir)) << "\n";
      cfg.close();
      std::cout << "wrote " << (dir / "service.toml").string() << "\n";
      if (d_serve) return serve(service_config((dir / "service.toml").string()));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
