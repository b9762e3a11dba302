#include "mlfield/field/optimize.hpp"

#include <cmath>

#include "mlfield/common/error.hpp"
#include "mlfield/field/render.hpp"

namespace mlfield::field {
namespace {

using semantic::TargetLevel;

struct AdamState {
  std::vector<double> m, v;
  int step = 0;
};

// Accumulates dL/df_i = sum_p w_i(p) dL/dF(p).
void backward(const BlendWeights& bw, const FeatureImage& dl_dpixel, std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto& d = dl_dpixel.values();
  const std::size_t n = static_cast<std::size_t>(bw.width) * bw.height;
  for (std::size_t p = 0; p < n; ++p)
    for (auto k = bw.offsets[p]; k < bw.offsets[p + 1]; ++k) {
      const double w = bw.weight[k];
      const std::size_t g = bw.gaussian[k] * 3;
      for (int c = 0; c < 3; ++c) grad[g + c] += w * d[p * 3 + c];
    }
}

void adam_step(Scene& scene, TargetLevel level, const std::vector<double>& grad, AdamState& st,
               const TrainConfig& cfg, double lr) {
  ++st.step;
  const double bc1 = 1 - std::pow(cfg.beta1, st.step), bc2 = 1 - std::pow(cfg.beta2, st.step);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    auto& f = scene[i].feature(level);
    for (int c = 0; c < 3; ++c) {
      const std::size_t k = i * 3 + c;
      st.m[k] = cfg.beta1 * st.m[k] + (1 - cfg.beta1) * grad[k];
      st.v[k] = cfg.beta2 * st.v[k] + (1 - cfg.beta2) * grad[k] * grad[k];
      const double step = lr * (st.m[k] / bc1) / (std::sqrt(st.v[k] / bc2) + cfg.epsilon);
      f[c] = static_cast<float>(f[c] - step);
    }
  }
}

}  // namespace

TrainReport optimize_features(Scene& scene, std::span<const TrainingView> views, const TrainConfig& cfg) {
  if (views.empty()) throw InvalidInput("feature optimization needs at least one training view");
  if (cfg.iterations < 0) throw InvalidInput("iteration count must be non-negative");
  if (!(cfg.learning_rate > 0)) throw InvalidInput("learning rate must be positive");
  if (!(cfg.final_rate_ratio > 0 && cfg.final_rate_ratio <= 1)) throw InvalidInput("final rate ratio must lie in (0, 1]");
  for (const auto& v : views) {
    validate(v.camera);
    if (v.object_gt.width() != v.camera.width || v.object_gt.height() != v.camera.height ||
        !v.object_gt.same_shape(v.part_gt))
      throw InvalidInput("training view ground truth does not match its camera resolution");
  }
  validate(std::span<const FeatureGaussian>(scene));
  TrainReport report;
  if (cfg.iterations == 0) return report;

  std::vector<BlendWeights> weights;
  weights.reserve(views.size());
  for (const auto& v : views) weights.push_back(compute_blend_weights(scene, v.camera, {false, cfg.threads}));

  AdamState obj{std::vector<double>(scene.size() * 3), std::vector<double>(scene.size() * 3)};
  AdamState part = obj;
  std::vector<double> grad(scene.size() * 3);
  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t vi = static_cast<std::size_t>(it) % views.size();
    const auto& bw = weights[vi];
    const double progress = cfg.iterations > 1 ? double(it) / (cfg.iterations - 1) : 1.0;
    const double lr = cfg.learning_rate * std::pow(cfg.final_rate_ratio, progress);
    for (auto level : {TargetLevel::Object, TargetLevel::Part}) {
      const auto rendered = apply_blend_weights(bw, scene, level);
      const auto& gt = level == TargetLevel::Object ? views[vi].object_gt : views[vi].part_gt;
      const auto loss = compute_loss(rendered, gt, cfg.loss);
      backward(bw, loss.gradient, grad);
      adam_step(scene, level, grad, level == TargetLevel::Object ? obj : part, cfg, lr);
      (level == TargetLevel::Object ? report.final_object_loss : report.final_part_loss) = loss.value;
    }
    report.iterations = it + 1;
    if (cfg.progress && ((it + 1) % std::max(1, cfg.report_every) == 0 || it + 1 == cfg.iterations))
      cfg.progress(it + 1, 0.5 * (report.final_object_loss + report.final_part_loss));
  }
  return report;
}

}  // namespace mlfield::field
