#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mlfield/common/error.hpp"
#include "mlfield/field/render.hpp"
#include "mlfield/query/decode.hpp"
#include "mlfield/query/engine.hpp"
#include "mlfield/query/relevancy.hpp"
#include "mlfield/query/resolve.hpp"
#include "mlfield/semantic/dictionary.hpp"
#include "mlfield/semantic/gt_frames.hpp"
#include "mlfield/toy/toy_scene.hpp"

using namespace mlfield;
using namespace mlfield::query;
using semantic::TargetLevel;
using semantic::TargetRecord;

namespace {

constexpr std::size_t kDim = 8;

Embedding unit(std::vector<double> v) {
  v.resize(kDim, 0.0);
  return semantic::normalize(v);
}

Embedding axis(std::size_t i) {
  std::vector<double> v(kDim, 0.0);
  v[i] = 1.0;
  return unit(v);
}

// Canonicals on the last three axes, orthogonal to anything built on 0..4.
RelevancyContext orthogonal_context() { return {{axis(5), axis(6), axis(7)}}; }

// Literal min over canonicals of exp(q) / (exp(c) + exp(q)).
double relevancy_oracle(const Embedding& img, const Embedding& q, const std::vector<Embedding>& canon) {
  long double best = 2;
  for (const auto& c : canon) {
    const long double eq = std::exp(static_cast<long double>(semantic::dot(img, q)));
    const long double ec = std::exp(static_cast<long double>(semantic::dot(img, c)));
    best = std::min(best, eq / (ec + eq));
  }
  return static_cast<double>(best);
}

struct DictBuilder {
  semantic::MappingDictionary dict;
  std::uint32_t next = 1;

  std::uint32_t object(const Embedding& raw, std::optional<std::string> label = std::nullopt) {
    TargetRecord r;
    r.id = next++;
    r.level = TargetLevel::Object;
    r.raw_embedding = raw;
    r.effective_embedding = raw;
    r.label = std::move(label);
    dict.records[r.id] = r;
    return r.id;
  }
  std::uint32_t part(std::uint32_t parent, const Embedding& raw, std::optional<std::string> label = std::nullopt) {
    TargetRecord r;
    r.id = next++;
    r.level = TargetLevel::Part;
    r.parent_id = parent;
    r.raw_embedding = raw;
    r.effective_embedding = semantic::deviate(dict.records.at(parent).raw_embedding, raw, dict.reserving_weight);
    r.label = std::move(label);
    dict.records[r.id] = r;
    return r.id;
  }
};

Query make_query(const Embedding& e, LevelHint hint) { return {"q", e, hint}; }

}  // namespace

TEST_CASE("relevancy examples") {
  const auto ctx1 = RelevancyContext{{axis(1)}};
  // equal logits
  CHECK(relevancy(axis(0), axis(2), RelevancyContext{{axis(3), axis(4)}}) == 0.5);
  // query dot 1, canonical dot 0
  CHECK(relevancy(axis(0), axis(0), ctx1) == doctest::Approx(std::exp(1.0) / (1 + std::exp(1.0))).epsilon(1e-12));
  CHECK(relevancy(axis(0), axis(0), ctx1) == doctest::Approx(0.7311).epsilon(1e-4));
  // query dot 0, canonical dot 1
  CHECK(relevancy(axis(1), axis(0), ctx1) == doctest::Approx(1 / (1 + std::exp(1.0))).epsilon(1e-12));
  CHECK(relevancy(axis(1), axis(0), ctx1) == doctest::Approx(0.2689).epsilon(1e-4));
}

TEST_CASE("relevancy errors") {
  Embedding short_e;
  short_e.values = {1.f, 0.f};
  CHECK_THROWS_AS(relevancy(short_e, axis(0), orthogonal_context()), InvalidInput);
  CHECK_THROWS_AS(relevancy(axis(0), axis(0), RelevancyContext{}), InvalidInput);
  Embedding long_e = axis(0);
  long_e.values[0] = 2.f;
  CHECK_THROWS_AS(relevancy(long_e, axis(0), orthogonal_context()), InvalidInput);
  CHECK_THROWS_AS(relevancy_from_dots(0.3, {}), InvalidInput);
}

TEST_CASE("relevancy matches the literal formula and its properties") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  auto rnd = [&] {
    std::vector<double> v(kDim);
    for (auto& x : v) x = n(rng);
    return semantic::normalize(v);
  };
  for (int trial = 0; trial < 2000; ++trial) {
    const auto img = rnd(), q = rnd();
    RelevancyContext ctx{{rnd(), rnd(), rnd()}};
    const double s = relevancy(img, q, ctx);
    CHECK(s == doctest::Approx(relevancy_oracle(img, q, ctx.canonical_embeddings)).epsilon(1e-12));
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    auto perm = ctx;
    std::reverse(perm.canonical_embeddings.begin(), perm.canonical_embeddings.end());
    CHECK(relevancy(img, q, perm) == s);

    std::vector<double> cd{n(rng) * 0.3, n(rng) * 0.3, n(rng) * 0.3};
    const double qd = n(rng) * 0.3;
    const double base = relevancy_from_dots(qd, cd);
    CHECK(relevancy_from_dots(qd + 0.01, cd) > base);
    // decreasing in each canonical dot; the binding one is the maximum
    const auto worst = std::max_element(cd.begin(), cd.end()) - cd.begin();
    auto up = cd;
    up[worst] += 0.01;
    CHECK(relevancy_from_dots(qd, up) < base);
    for (std::size_t i = 0; i < cd.size(); ++i) {
      auto u2 = cd;
      u2[i] += 0.01;
      CHECK(relevancy_from_dots(qd, u2) <= base);
    }
  }
}

TEST_CASE("preliminary_localize examples") {
  const auto ctx = orthogonal_context();
  SUBCASE("single record") {
    DictBuilder b;
    b.object(axis(0));
    CHECK(preliminary_localize(b.dict, axis(1), ctx).target_id == 1);
  }
  SUBCASE("part with the largest query dot wins") {
    DictBuilder b;
    const auto o = b.object(axis(0));
    const auto p = b.part(o, axis(1));
    const auto q = unit({0.2, 1.0});
    REQUIRE(semantic::dot(b.dict.at(p).effective_embedding, q) > semantic::dot(b.dict.at(o).effective_embedding, q));
    const auto s = preliminary_localize(b.dict, q, ctx);
    CHECK(s.target_id == p);
    CHECK(s.relevancy == doctest::Approx(relevancy_oracle(b.dict.at(p).effective_embedding, q, ctx.canonical_embeddings)));
  }
  SUBCASE("identical embeddings tie to the lower id") {
    DictBuilder b;
    b.object(axis(2));
    b.object(axis(2));
    CHECK(preliminary_localize(b.dict, axis(2), ctx).target_id == 1);
  }
  SUBCASE("empty dictionary") {
    CHECK_THROWS_AS(preliminary_localize(semantic::MappingDictionary{}, axis(0), ctx), InvalidInput);
  }
}

TEST_CASE("resolve_target examples") {
  const auto ctx = orthogonal_context();
  DictBuilder b;
  const auto controller = b.object(axis(0), "controller");
  const auto button = b.part(controller, axis(1), "button");
  const auto stick = b.part(controller, axis(2), "joystick");
  const auto apple = b.object(axis(3), "apple");

  SUBCASE("object query stays at step 1") {
    const auto q = make_query(axis(3), LevelHint::Object);
    const auto pre = preliminary_localize(b.dict, q.embedding, ctx);
    REQUIRE(pre.target_id == apple);
    const auto r = resolve_target(b.dict, q, ctx, pre);
    CHECK(r.target_id == apple);
    CHECK(r.level == TargetLevel::Object);
    CHECK(r.path == ResolutionPath::Step1);
    CHECK(r.relevancy == pre.relevancy);
  }
  SUBCASE("button of controller goes through step 2") {
    const auto q = make_query(unit({0.95, 0.31}), LevelHint::Part);
    const auto pre = preliminary_localize(b.dict, q.embedding, ctx);
    REQUIRE(pre.target_id == controller);
    ResolveOptions opts;
    opts.embed_label = [](const std::string& s) { return s == "controller" ? axis(0) : axis(4); };
    const auto r = resolve_target(b.dict, q, ctx, pre, opts);
    CHECK(r.target_id == button);
    CHECK(r.path == ResolutionPath::Step2);
    CHECK_FALSE(r.fell_back);
    auto augmented = ctx.canonical_embeddings;
    augmented.push_back(axis(0));
    const double want = relevancy_oracle(b.dict.at(button).effective_embedding, q.embedding, augmented);
    CHECK(r.relevancy == doctest::Approx(want).epsilon(1e-12));
    CHECK(want > relevancy_oracle(b.dict.at(stick).effective_embedding, q.embedding, augmented));
  }
  SUBCASE("part preliminary returns itself") {
    const auto q = make_query(axis(2), LevelHint::Part);
    const auto pre = preliminary_localize(b.dict, q.embedding, ctx);
    REQUIRE(pre.target_id == stick);
    const auto r = resolve_target(b.dict, q, ctx, pre);
    CHECK(r.target_id == stick);
    CHECK(r.path == ResolutionPath::Step1);
  }
  SUBCASE("object without parts falls back") {
    const auto q = make_query(axis(3), LevelHint::Part);
    const auto r = resolve_target(b.dict, q, ctx, preliminary_localize(b.dict, q.embedding, ctx));
    CHECK(r.target_id == apple);
    CHECK(r.fell_back);
  }
  SUBCASE("unlabelled parent uses its image embedding") {
    DictBuilder u;
    const auto o = u.object(unit({1.0, 0.0, 0.0, 0.0, 0.3}));
    const auto p1 = u.part(o, axis(1));
    const auto p2 = u.part(o, axis(2));
    const auto q = make_query(unit({0.9, 0.3, 0.28}), LevelHint::Part);
    const auto pre = preliminary_localize(u.dict, q.embedding, ctx);
    REQUIRE(pre.target_id == o);
    auto augmented = ctx.canonical_embeddings;
    augmented.push_back(u.dict.at(o).raw_embedding);
    const double r1 = relevancy_oracle(u.dict.at(p1).effective_embedding, q.embedding, augmented);
    const double r2 = relevancy_oracle(u.dict.at(p2).effective_embedding, q.embedding, augmented);
    const auto r = resolve_target(u.dict, q, ctx, pre);
    CHECK(r.target_id == (r1 >= r2 ? p1 : p2));
    CHECK(r.relevancy == doctest::Approx(std::max(r1, r2)).epsilon(1e-12));
  }
}

TEST_CASE("auto level classification") {
  const auto ctx = orthogonal_context();
  DictBuilder b;
  const auto o = b.object(axis(0));
  const auto p = b.part(o, axis(1));
  b.object(axis(3));

  // query near the object: the deviated part is second and close
  const auto near = make_query(unit({1.0, 0.15}), LevelHint::Auto);
  const auto pre = preliminary_localize(b.dict, near.embedding, ctx);
  REQUIRE(pre.target_id == o);
  const auto ranked = rank_targets(b.dict, near.embedding, ctx);
  REQUIRE(ranked[1].target_id == p);
  const double gap = ranked[0].relevancy - ranked[1].relevancy;
  CHECK(classify_level(b.dict, near, ctx, pre, gap + 1e-9) == TargetLevel::Part);
  CHECK(classify_level(b.dict, near, ctx, pre, gap - 1e-9) == TargetLevel::Object);

  // part winner is always a part query
  const auto on_part = make_query(axis(1), LevelHint::Auto);
  CHECK(classify_level(b.dict, on_part, ctx, preliminary_localize(b.dict, on_part.embedding, ctx)) ==
        TargetLevel::Part);

  // a custom classifier replaces the default; explicit hints bypass it
  ResolveOptions opts;
  int calls = 0;
  opts.classifier = [&](auto&&...) {
    ++calls;
    return TargetLevel::Object;
  };
  CHECK(query_level(b.dict, on_part, ctx, {p, 0.6}, opts) == TargetLevel::Object);
  CHECK(query_level(b.dict, make_query(axis(1), LevelHint::Part), ctx, {p, 0.6}, opts) == TargetLevel::Part);
  CHECK(calls == 1);
  CHECK(parse_level_hint("part") == LevelHint::Part);
  CHECK_THROWS_AS(parse_level_hint("thing"), InvalidInput);
}

TEST_CASE("deviated part outranks its object exactly when the blend is closer to the query") {
  // Randomized constructions: unit object, part and query on the first five
  // axes, canonicals orthogonal to them so every canonical dot is 0.
  const auto ctx = orthogonal_context();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  int part_cases = 0, adversarial = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<double> vo(5), vp(5), vq(5);
    for (int i = 0; i < 5; ++i) vo[i] = n(rng), vp[i] = n(rng), vq[i] = n(rng);
    DictBuilder b;
    const auto o = b.object(unit(vo));
    const auto p = b.part(o, unit(vp));
    const auto q = unit(vq);
    const auto& fo = b.dict.at(o).raw_embedding;
    const auto& fp = b.dict.at(p).raw_embedding;
    std::vector<double> blend(kDim);
    for (std::size_t i = 0; i < kDim; ++i) blend[i] = 0.3 * fo.values[i] + 0.7 * fp.values[i];
    double bq = 0, bn = 0;
    for (std::size_t i = 0; i < kDim; ++i) bq += blend[i] * q.values[i], bn += blend[i] * blend[i];
    const bool holds = bq / std::sqrt(bn) > semantic::dot(fo, q) + 1e-9;
    const bool fails = bq / std::sqrt(bn) < semantic::dot(fo, q) - 1e-9;
    const auto pre = preliminary_localize(b.dict, q, ctx);
    if (holds) {
      ++part_cases;
      CHECK(pre.target_id == p);
      CHECK(resolve_target(b.dict, make_query(q, LevelHint::Part), ctx, pre).target_id == p);
      if (semantic::dot(fp, q) < semantic::dot(fo, q)) ++adversarial;
    } else if (fails) {
      CHECK(pre.target_id == o);
      // step 2 still lands on the only part
      CHECK(resolve_target(b.dict, make_query(q, LevelHint::Part), ctx, pre).target_id == p);
    }
  }
  CHECK(part_cases > 500);
  CHECK(adversarial > 20);
}

TEST_CASE("decode_mask examples") {
  const double t = 0.02;
  FeatureImage f(4, 3, 0.0);
  const semantic::LowDimCode code{{0.5f, 0.f, 1.f}};
  BinaryRaster want(4, 3, 0);
  for (int x = 1; x < 3; ++x)
    for (int y = 0; y < 2; ++y) {
      f.set_pixel(x, y, {0.5, 0.0, 1.0});
      want(x, y) = 1;
    }
  CHECK(decode_mask(f, code, t) == want);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-t, t);
  auto noisy = f;
  for (auto& v : noisy.values()) v += u(rng);
  CHECK(decode_mask(noisy, code, t) == want);

  // one channel just past the band
  noisy.at(1, 0, 2) = 1.0 + t * 1.01;
  want(1, 0) = 0;
  CHECK(decode_mask(noisy, code, t) == want);

  CHECK(decode_mask(f, semantic::LowDimCode{{1.f, 1.f, 1.f}}, t) == BinaryRaster(4, 3, 0));
}

TEST_CASE("decode_mask recovers ground-truth identity regions") {
  const auto toy = toy::panel_scene();
  semantic::SyntheticProvider provider(7, 32);
  const auto dict = semantic::build_mapping_dictionary(toy.hierarchy, semantic::embed_hierarchy(toy.hierarchy, provider));
  const auto gt = semantic::generate_gt_feature_frames(toy.identity, dict);
  for (std::size_t v = 0; v < gt.size(); ++v)
    for (const auto& [id, rec] : dict.records) {
      const auto& ids = rec.level == TargetLevel::Object ? toy.identity[v].object_ids : toy.identity[v].part_ids;
      const auto& frame = rec.level == TargetLevel::Object ? gt[v].object : gt[v].part;
      BinaryRaster want(ids.width(), ids.height(), 0);
      for (std::size_t p = 0; p < ids.size(); ++p) want[p] = ids[p] == id;
      CHECK(decode_mask(frame, rec.code, dict.tolerance) == want);
    }
}

TEST_CASE("top_k_query examples") {
  const auto ctx = orthogonal_context();
  DictBuilder b;
  const auto chair1 = b.object(axis(0));
  const auto chair2 = b.object(axis(0));
  const auto table = b.object(unit({0.6, 0.0, 0.8}));
  const auto q = make_query(axis(0), LevelHint::Object);

  const auto one = top_k_query(b.dict, q, ctx, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == resolve_target(b.dict, q, ctx, preliminary_localize(b.dict, q.embedding, ctx)));

  const auto two = top_k_query(b.dict, q, ctx, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].target_id == chair1);
  CHECK(two[1].target_id == chair2);
  CHECK(two[0].relevancy == two[1].relevancy);

  const auto all = top_k_query(b.dict, q, ctx, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[2].target_id == table);
  CHECK_THROWS_AS(top_k_query(b.dict, q, ctx, 0), InvalidInput);
}

TEST_CASE("top_k_query deduplicates parts reached through several records") {
  const auto ctx = orthogonal_context();
  DictBuilder b;
  const auto o = b.object(axis(0));
  const auto p = b.part(o, axis(1));
  const auto r = top_k_query(b.dict, make_query(unit({1.0, 0.2}), LevelHint::Part), ctx, 5);
  REQUIRE(r.size() == 1);
  CHECK(r[0].target_id == p);
}

TEST_CASE("query engine answers from cached frames") {
  auto toy = toy::panel_scene();
  auto provider = std::make_shared<semantic::SyntheticProvider>(7, 64);
  auto dict = semantic::build_mapping_dictionary(toy.hierarchy, semantic::embed_hierarchy(toy.hierarchy, *provider));
  for (std::size_t i = 0; i < toy.scene.size(); ++i) {
    const auto& oc = dict.at(toy.object_of[i]).code.components;
    const auto& pc = dict.at(toy.part_of[i]).code.components;
    toy.scene[i].object_feature = {oc[0], oc[1], oc[2]};
    toy.scene[i].part_feature = {pc[0], pc[1], pc[2]};
  }
  QueryEngine engine(dict, toy.scene, provider);
  CHECK_THROWS_AS(engine.query("door"), InvalidInput);

  CHECK(engine.set_view(toy.cameras[0]));
  CHECK_FALSE(engine.set_view(toy.cameras[0]));
  const auto before = field::render_invocations();
  for (int i = 0; i < 20; ++i) {
    const auto r = engine.query("door", LevelHint::Part);
    REQUIRE(r.size() == 1);
    CHECK(r[0].target.target_id == 2);
    CHECK(r[0].target.level == TargetLevel::Part);
  }
  CHECK(field::render_invocations() == before);
  CHECK(engine.queries_served() == 20);

  // decoded mask against the identity raster of the same view
  const auto mask = engine.query("door", LevelHint::Part)[0].mask;
  const auto& ids = toy.identity[0].part_ids;
  std::size_t covered = 0, agree = 0;
  for (std::size_t p = 0; p < ids.size(); ++p)
    if (ids[p] == 2) {
      ++covered;
      agree += mask[p];
    }
  REQUIRE(covered > 0);
  CHECK(double(agree) / covered >= 0.95);

  const auto cabinet = engine.query("cabinet", LevelHint::Object);
  CHECK(cabinet[0].target.target_id == 1);

  CHECK_THROWS_AS(QueryEngine(dict, toy.scene, std::make_shared<semantic::SyntheticProvider>(7, 16)), InvalidInput);
}
