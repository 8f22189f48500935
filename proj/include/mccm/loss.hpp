#pragma once

#include <span>

namespace mccm {

/// Labels follow the pristine-positive convention: y = 1 pristine, y = 0 synthetic.
struct LossConfig {
  double alpha = 1.0;
  double gamma = 3.0;
  double lambda = 0.5;
  double clamp_eps = 1e-7;

  void validate() const;
};

/// Sigmoid outputs of the spatial (s), frequency (f) and joint (r) heads.
struct HeadOutputs {
  double s = 0.5;
  double f = 0.5;
  double r = 0.5;
};

struct HeadGrads {
  double ds = 0.0;
  double df = 0.0;
  double dr = 0.0;
};

struct LossValue {
  double total = 0.0;
  double ce_r = 0.0;
  double cmfl_sf = 0.0;
  double cmfl_fs = 0.0;
};

double clamp_prob(double p, double eps);
HeadOutputs clamp_heads(const HeadOutputs& h, double eps);

/// p for y = 1, 1 - p otherwise.
inline double p_target(double p, int y) { return y == 1 ? p : 1.0 - p; }

// The scalar terms below take already-clamped probabilities.

double ce(double p, int y);
double focal(double p, int y, double alpha, double gamma);

/// w(s_t, f_t) = f_t * 2 s_t f_t / (s_t + f_t), and 0 when s_t + f_t < 1e-12.
double cmfl_weight(double s_t, double f_t);

/// -alpha (1 - w(s_t, f_t))^gamma log(s_t). Asymmetric: the first branch's
/// log-loss is modulated by how much the second branch agrees.
double cmfl(double sp, double fp, int y, double alpha, double gamma);

/// (1 - lambda) CE(r) + lambda (CMFL(s,f) + CMFL(f,s)) on clamped heads.
LossValue total_loss(const HeadOutputs& h, int y, const LossConfig& cfg);

/// Analytic partials of total_loss w.r.t. the (clamped) head probabilities,
/// differentiating through the channel weight w. The clamp is treated as identity.
HeadGrads total_loss_grad(const HeadOutputs& h, int y, const LossConfig& cfg);

/// Mean of total_loss over a batch.
LossValue mean_total_loss(std::span<const HeadOutputs> h, std::span<const int> y, const LossConfig& cfg);

/// Baseline objective on a single head; identical to ce.
double bce_loss(double p, int y);
double bce_grad(double p, int y);

}  // namespace mccm
