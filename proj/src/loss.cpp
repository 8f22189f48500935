#include "mccm/loss.hpp"

#include <algorithm>
#include <cmath>

#include "mccm/error.hpp"

namespace mccm {

namespace {

// d/d(a) and d/d(b) of cmfl with s_t = a, f_t = b.
struct CmflPartials {
  double d_first = 0.0;
  double d_second = 0.0;
};

CmflPartials cmfl_partials(double a, double b, double alpha, double gamma) {
  const double sum = a + b;
  double w = 0.0, dw_da = 0.0, dw_db = 0.0;
  if (sum >= 1e-12) {
    w = 2.0 * a * b * b / sum;
    dw_da = 2.0 * b * b * b / (sum * sum);
    dw_db = 2.0 * a * b * (2.0 * a + b) / (sum * sum);
  }
  const double one_minus_w = 1.0 - w;
  const double log_a = std::log(a);
  const double mod = std::pow(one_minus_w, gamma);
  // d mod / dw = -gamma (1-w)^(gamma-1); zero when gamma == 0.
  const double dmod_dw = gamma == 0.0 ? 0.0 : -gamma * std::pow(one_minus_w, gamma - 1.0);
  CmflPartials p;
  p.d_first = -alpha * (dmod_dw * dw_da * log_a + mod / a);
  p.d_second = -alpha * dmod_dw * dw_db * log_a;
  return p;
}

}  // namespace

void LossConfig::validate() const {
  require(alpha >= 0.0, "alpha must be >= 0");
  require(gamma >= 0.0, "gamma must be >= 0");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0,1]");
  require(clamp_eps > 0.0 && clamp_eps < 0.5, "clamp_eps must be in (0, 0.5)");
}

double clamp_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

HeadOutputs clamp_heads(const HeadOutputs& h, double eps) {
  return {clamp_prob(h.s, eps), clamp_prob(h.f, eps), clamp_prob(h.r, eps)};
}

double ce(double p, int y) { return -std::log(p_target(p, y)); }

double focal(double p, int y, double alpha, double gamma) {
  const double pt = p_target(p, y);
  return -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
}

double cmfl_weight(double s_t, double f_t) {
  const double sum = s_t + f_t;
  if (sum < 1e-12) return 0.0;
  return f_t * (2.0 * s_t * f_t / sum);
}

double cmfl(double sp, double fp, int y, double alpha, double gamma) {
  const double s_t = p_target(sp, y);
  const double f_t = p_target(fp, y);
  return -alpha * std::pow(1.0 - cmfl_weight(s_t, f_t), gamma) * std::log(s_t);
}

LossValue total_loss(const HeadOutputs& h, int y, const LossConfig& cfg) {
  const HeadOutputs c = clamp_heads(h, cfg.clamp_eps);
  LossValue v;
  v.ce_r = ce(c.r, y);
  v.cmfl_sf = cmfl(c.s, c.f, y, cfg.alpha, cfg.gamma);
  v.cmfl_fs = cmfl(c.f, c.s, y, cfg.alpha, cfg.gamma);
  v.total = (1.0 - cfg.lambda) * v.ce_r + cfg.lambda * (v.cmfl_sf + v.cmfl_fs);
  return v;
}

HeadGrads total_loss_grad(const HeadOutputs& h, int y, const LossConfig& cfg) {
  const HeadOutputs c = clamp_heads(h, cfg.clamp_eps);
  const double sign = y == 1 ? 1.0 : -1.0;  // d p_t / d p
  const double s_t = p_target(c.s, y), f_t = p_target(c.f, y), r_t = p_target(c.r, y);

  const auto sf = cmfl_partials(s_t, f_t, cfg.alpha, cfg.gamma);
  const auto fs = cmfl_partials(f_t, s_t, cfg.alpha, cfg.gamma);

  HeadGrads g;
  g.dr = (1.0 - cfg.lambda) * (-sign / r_t);
  g.ds = cfg.lambda * sign * (sf.d_first + fs.d_second);
  g.df = cfg.lambda * sign * (sf.d_second + fs.d_first);
  return g;
}

LossValue mean_total_loss(std::span<const HeadOutputs> h, std::span<const int> y, const LossConfig& cfg) {
  require(h.size() == y.size() && !h.empty(), "mean_total_loss: batch size mismatch or empty batch");
  LossValue acc;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto v = total_loss(h[i], y[i], cfg);
    acc.total += v.total;
    acc.ce_r += v.ce_r;
    acc.cmfl_sf += v.cmfl_sf;
    acc.cmfl_fs += v.cmfl_fs;
  }
  const double n = static_cast<double>(h.size());
  acc.total /= n;
  acc.ce_r /= n;
  acc.cmfl_sf /= n;
  acc.cmfl_fs /= n;
  return acc;
}

double bce_loss(double p, int y) { return ce(p, y); }

double bce_grad(double p, int y) { return y == 1 ? -1.0 / p : 1.0 / (1.0 - p); }

}  // namespace mccm
