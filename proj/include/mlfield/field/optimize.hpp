#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mlfield/common/feature_image.hpp"
#include "mlfield/field/camera.hpp"
#include "mlfield/field/gaussian.hpp"
#include "mlfield/field/loss.hpp"

namespace mlfield::field {

// A training view: camera plus the ground-truth feature images of both levels.
struct TrainingView {
  CameraPose camera;
  FeatureImage object_gt;
  FeatureImage part_gt;
};

struct TrainConfig {
  int iterations = 2000;
  double learning_rate = 0.02;
  // Step size decays log-linearly to learning_rate * final_rate_ratio at the
  // last iteration; 1 keeps it constant. Without decay Adam keeps dithering
  // around the optimum at roughly the step size.
  double final_rate_ratio = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;
  LossConfig loss;
  unsigned threads = 0;
  // Called every `report_every` iterations (and after the last one) with the
  // iteration count and the mean loss of the two levels at that step.
  std::function<void(int, double)> progress;
  int report_every = 100;
};

struct TrainReport {
  int iterations = 0;
  double final_object_loss = 0.0;
  double final_part_loss = 0.0;
};

// Adam on the per-Gaussian feature codes only; geometry stays fixed. The two
// levels are optimized side by side against their own ground truth, one view
// per iteration in round-robin order. Throws InvalidInput without views or on
// a view whose ground truth does not match its camera resolution.
TrainReport optimize_features(Scene& scene, std::span<const TrainingView> views, const TrainConfig& cfg = {});

}  // namespace mlfield::field
