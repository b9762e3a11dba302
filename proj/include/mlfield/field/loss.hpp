#pragma once

#include "mlfield/common/feature_image.hpp"

namespace mlfield::field {

struct LossConfig {
  double lambda = 0.2;  // weight of the D-SSIM term
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  double ssim_c1 = 0.01 * 0.01;
  double ssim_c2 = 0.03 * 0.03;
};

struct LossResult {
  double value = 0.0;
  double l1 = 0.0;
  double ssim = 1.0;
  FeatureImage gradient;  // dL / d rendered
};

// (1 - lambda) * L1 + lambda * (1 - SSIM) / 2. SSIM is evaluated per channel
// with a normalized Gaussian window and zero padding (output the size of the
// input), then averaged over channels and pixels. Throws InvalidInput on
// resolution mismatch or an invalid config.
LossResult compute_loss(const FeatureImage& rendered, const FeatureImage& gt, const LossConfig& cfg = {},
                        bool with_gradient = true);

// Mean SSIM alone (same conventions as above).
double ssim(const FeatureImage& a, const FeatureImage& b, const LossConfig& cfg = {});

}  // namespace mlfield::field
