#include "mlfield/field/loss.hpp"

#include <cmath>
#include <vector>

#include "mlfield/common/error.hpp"

namespace mlfield::field {
namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    const double d = i - size / 2;
    k[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable zero-padded correlation of one W x H plane with a symmetric kernel.
class Blur {
 public:
  Blur(int w, int h, std::vector<double> kernel) : w_(w), h_(h), k_(std::move(kernel)), tmp_(std::size_t(w) * h) {}

  void apply(const std::vector<double>& in, std::vector<double>& out) {
    const int r = static_cast<int>(k_.size()) / 2;
    out.assign(in.size(), 0.0);
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        double s = 0;
        for (int i = -r; i <= r; ++i) {
          const int xx = x + i;
          if (xx >= 0 && xx < w_) s += k_[i + r] * in[std::size_t(y) * w_ + xx];
        }
        tmp_[std::size_t(y) * w_ + x] = s;
      }
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        double s = 0;
        for (int i = -r; i <= r; ++i) {
          const int yy = y + i;
          if (yy >= 0 && yy < h_) s += k_[i + r] * tmp_[std::size_t(yy) * w_ + x];
        }
        out[std::size_t(y) * w_ + x] = s;
      }
  }

 private:
  int w_, h_;
  std::vector<double> k_;
  std::vector<double> tmp_;
};

void check(const FeatureImage& a, const FeatureImage& b, const LossConfig& cfg) {
  if (!a.same_shape(b)) throw InvalidInput("rendered and ground-truth frames differ in resolution");
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw InvalidInput("loss lambda must lie in [0, 1]");
  if (cfg.ssim_window < 1 || cfg.ssim_window % 2 == 0) throw InvalidInput("SSIM window must be a positive odd size");
  if (!(cfg.ssim_sigma > 0)) throw InvalidInput("SSIM sigma must be positive");
}

// Mean SSIM over channels and pixels; optionally d(mean SSIM)/dx into grad.
double ssim_impl(const FeatureImage& xi, const FeatureImage& yi, const LossConfig& cfg, FeatureImage* grad) {
  const int w = xi.width(), h = xi.height();
  const std::size_t n = std::size_t(w) * h;
  if (n == 0) return 1.0;
  Blur blur(w, h, gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma));
  const double c1 = cfg.ssim_c1, c2 = cfg.ssim_c2;
  const double inv_count = 1.0 / double(n * 3);
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  std::vector<double> mx, my, exx, eyy, exy;
  std::vector<double> dmu(n), dxx(n), dxy(n), gmu, gxx, gxy;
  double total = 0;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = xi.values()[p * 3 + c];
      y[p] = yi.values()[p * 3 + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    blur.apply(x, mx);
    blur.apply(y, my);
    blur.apply(xx, exx);
    blur.apply(yy, eyy);
    blur.apply(xy, exy);
    for (std::size_t p = 0; p < n; ++p) {
      const double a1 = 2 * mx[p] * my[p] + c1;
      const double a2 = 2 * (exy[p] - mx[p] * my[p]) + c2;
      const double b1 = mx[p] * mx[p] + my[p] * my[p] + c1;
      const double b2 = (exx[p] - mx[p] * mx[p]) + (eyy[p] - my[p] * my[p]) + c2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (grad) {
        dmu[p] = s * (2 * my[p] / a1 - 2 * my[p] / a2 - 2 * mx[p] / b1 + 2 * mx[p] / b2);
        dxx[p] = -s / b2;
        dxy[p] = 2 * s / a2;
      }
    }
    if (grad) {
      blur.apply(dmu, gmu);
      blur.apply(dxx, gxx);
      blur.apply(dxy, gxy);
      for (std::size_t p = 0; p < n; ++p)
        grad->values()[p * 3 + c] = inv_count * (gmu[p] + 2 * x[p] * gxx[p] + y[p] * gxy[p]);
    }
  }
  return total * inv_count;
}

}  // namespace

double ssim(const FeatureImage& a, const FeatureImage& b, const LossConfig& cfg) {
  check(a, b, cfg);
  return ssim_impl(a, b, cfg, nullptr);
}

LossResult compute_loss(const FeatureImage& rendered, const FeatureImage& gt, const LossConfig& cfg,
                        bool with_gradient) {
  check(rendered, gt, cfg);
  LossResult out;
  const auto& r = rendered.values();
  const auto& g = gt.values();
  const double count = double(r.size());
  if (r.empty()) {
    out.gradient = FeatureImage(rendered.width(), rendered.height());
    return out;
  }
  double l1 = 0;
  for (std::size_t i = 0; i < r.size(); ++i) l1 += std::abs(r[i] - g[i]);
  out.l1 = l1 / count;

  FeatureImage ssim_grad;
  if (with_gradient) ssim_grad = FeatureImage(rendered.width(), rendered.height());
  out.ssim = cfg.lambda > 0 ? ssim_impl(rendered, gt, cfg, with_gradient ? &ssim_grad : nullptr) : 1.0;
  out.value = (1 - cfg.lambda) * out.l1 + cfg.lambda * (1 - out.ssim) / 2;

  if (with_gradient) {
    out.gradient = FeatureImage(rendered.width(), rendered.height());
    auto& d = out.gradient.values();
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double diff = r[i] - g[i];
      const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      d[i] = (1 - cfg.lambda) * sign / count;
      if (cfg.lambda > 0) d[i] -= cfg.lambda / 2 * ssim_grad.values()[i];
    }
  }
  return out;
}

}  // namespace mlfield::field
