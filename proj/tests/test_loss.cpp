#include <doctest.h>

#include <cmath>
#include <vector>

#include "mccm/error.hpp"
#include "mccm/loss.hpp"
#include "mccm/rng.hpp"

using namespace mccm;

namespace {

// Plain transcriptions used as oracles.
double oracle_w(double a, double b) { return a + b < 1e-12 ? 0.0 : b * (2.0 * a * b) / (a + b); }
double oracle_cmfl(double a, double b, double gamma) { return -std::pow(1.0 - oracle_w(a, b), gamma) * std::log(a); }

double total_at(double s, double f, double r, int y, const LossConfig& cfg) {
  return total_loss({s, f, r}, y, cfg).total;
}

}  // namespace

TEST_SUITE("lossfn") {
  TEST_CASE("target probability") {
    CHECK(p_target(0.9, 1) == 0.9);
    CHECK(p_target(0.9, 0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(p_target(0.5, 1) == 0.5);
    CHECK(p_target(0.5, 0) == 0.5);
  }

  TEST_CASE("cross entropy") {
    CHECK(ce(0.5, 1) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(ce(0.5, 1) == -std::log(0.5));
    CHECK(ce(1.0 - 1e-7, 1) < 1e-6);
    for (int k = 1; k < 64; ++k) {
      const double p = k / 64.0;
      CHECK(ce(p, 1) == ce(1.0 - p, 0));
    }
  }

  TEST_CASE("focal") {
    for (int k = 1; k < 1000; ++k) {
      const double p = k / 1000.0;
      CHECK(std::abs(focal(p, 1, 1.0, 0.0) - ce(p, 1)) <= 1e-12);
      CHECK(std::abs(focal(p, 0, 1.0, 0.0) - ce(p, 0)) <= 1e-12);
    }
    const double expected = -std::pow(0.5, 3) * std::log(0.5);
    CHECK(focal(0.5, 1, 1.0, 3.0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(focal(0.5, 1, 1.0, 3.0) == doctest::Approx(0.0866434).epsilon(1e-6));

    for (double gamma : {0.0, 0.5, 1.0, 2.0, 3.0, 5.0}) {
      double prev = focal(1e-4, 1, 1.0, gamma);
      for (int k = 2; k < 10000; ++k) {
        const double cur = focal(k * 1e-4, 1, 1.0, gamma);
        REQUIRE(cur <= prev);
        prev = cur;
      }
    }
  }

  TEST_CASE("channel weight") {
    for (int k = 1; k <= 9; ++k) {
      const double p = 0.1 * k;
      CHECK(cmfl_weight(p, p) == doctest::Approx(p * p).epsilon(1e-15));
    }
    CHECK(cmfl_weight(0.7, 0.0) == 0.0);
    CHECK(cmfl_weight(0.0, 0.7) == 0.0);
    CHECK(cmfl_weight(0.0, 0.0) == 0.0);
    CHECK(cmfl_weight(0.8, 0.6) == doctest::Approx(0.6 * 0.96 / 1.4).epsilon(1e-15));
    CHECK(cmfl_weight(0.8, 0.6) == doctest::Approx(0.4114286).epsilon(1e-7));

    for (int i = 0; i <= 100; ++i)
      for (int j = 0; j <= 100; ++j) {
        const double s = i / 100.0, f = j / 100.0;
        const double w = cmfl_weight(s, f);
        REQUIRE(w >= 0.0);
        REQUIRE(w <= 1.0);
        REQUIRE(w <= f + 1e-15);
      }
  }

  TEST_CASE("cmfl values") {
    CHECK(cmfl(0.8, 0.6, 1, 1.0, 3.0) == doctest::Approx(oracle_cmfl(0.8, 0.6, 3.0)).epsilon(1e-14));
    CHECK(cmfl(0.6, 0.8, 1, 1.0, 3.0) == doctest::Approx(oracle_cmfl(0.6, 0.8, 3.0)).epsilon(1e-14));
    // Frozen from the oracle above.
    CHECK(cmfl(0.8, 0.6, 1, 1.0, 3.0) == doctest::Approx(0.0454969).epsilon(1e-6));
    CHECK(cmfl(0.6, 0.8, 1, 1.0, 3.0) == doctest::Approx(0.0469937).epsilon(1e-6));
    // Agreement with high confidence suppresses the loss.
    CHECK(cmfl(1.0 - 1e-7, 1.0 - 1e-7, 1, 1.0, 3.0) < 1e-12);
  }

  TEST_CASE("cmfl reduces to cross entropy when the other branch is zero") {
    for (double alpha : {0.25, 1.0, 2.0})
      for (int k = 1; k < 100; ++k) {
        const double p = k / 100.0;
        CHECK(std::abs(cmfl(p, 1.0, 0, alpha, 3.0) - alpha * ce(p, 0)) <= 1e-12);
        CHECK(std::abs(cmfl(p, 0.0, 1, alpha, 3.0) - alpha * ce(p, 1)) <= 1e-12);
      }
  }

  TEST_CASE("cmfl is bounded by alpha times cross entropy") {
    for (int i = 1; i < 100; ++i)
      for (int j = 0; j <= 100; ++j)
        for (int y : {0, 1}) {
          const double s = i / 100.0, f = j / 100.0;
          REQUIRE(cmfl(s, f, y, 1.5, 2.0) <= 1.5 * ce(s, y) + 1e-15);
        }
  }

  TEST_CASE("total loss") {
    LossConfig cfg;
    const auto v = total_loss({0.8, 0.6, 0.7}, 1, cfg);
    const double expected = 0.5 * -std::log(0.7) + 0.5 * (oracle_cmfl(0.8, 0.6, 3.0) + oracle_cmfl(0.6, 0.8, 3.0));
    CHECK(v.total == doctest::Approx(expected).epsilon(1e-14));
    CHECK(v.total == doctest::Approx(0.2245828).epsilon(1e-6));
    CHECK(std::abs(v.total - (0.5 * v.ce_r + 0.5 * (v.cmfl_sf + v.cmfl_fs))) <= 1e-12);

    LossConfig ce_only = cfg;
    ce_only.lambda = 0.0;
    SplitMix64 rng(3);
    for (int i = 0; i < 1000; ++i) {
      const HeadOutputs h{rng.uniform(), rng.uniform(), rng.uniform(0.01, 0.99)};
      const int y = static_cast<int>(rng.below(2));
      CHECK(total_loss(h, y, ce_only).total == ce(h.r, y));
      CHECK(total_loss(h, y, cfg).total >= 0.0);
    }
  }

  TEST_CASE("total loss clamps before logs") {
    LossConfig cfg;
    const auto v = total_loss({0.0, 1.0, 0.0}, 1, cfg);
    CHECK(std::isfinite(v.total));
    CHECK(v.ce_r == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
    const auto g = total_loss_grad({0.0, 1.0, 0.0}, 1, cfg);
    CHECK(std::isfinite(g.ds));
    CHECK(std::isfinite(g.df));
    CHECK(std::isfinite(g.dr));
  }

  TEST_CASE("label symmetry on dyadic grid") {
    LossConfig cfg;
    for (int i = 1; i < 64; i += 3)
      for (int j = 1; j < 64; j += 5)
        for (int k = 1; k < 64; k += 7) {
          const double s = i / 64.0, f = j / 64.0, r = k / 64.0;
          REQUIRE(total_at(s, f, r, 1, cfg) == total_at(1.0 - s, 1.0 - f, 1.0 - r, 0, cfg));
        }
  }

  TEST_CASE("gradient at lambda 0") {
    LossConfig cfg;
    cfg.lambda = 0.0;
    const auto g = total_loss_grad({0.3, 0.4, 0.7}, 1, cfg);
    CHECK(g.dr == doctest::Approx(-1.0 / 0.7).epsilon(1e-15));
    CHECK(g.ds == 0.0);
    CHECK(g.df == 0.0);
  }

  TEST_CASE("analytic gradient matches central differences") {
    SplitMix64 rng(11);
    const double h = 1e-6;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      LossConfig cfg;
      cfg.gamma = static_cast<double>(rng.below(4));
      cfg.lambda = 0.25 * static_cast<double>(rng.below(5));
      const int y = static_cast<int>(rng.below(2));
      const double s = rng.uniform(0.01, 0.99), f = rng.uniform(0.01, 0.99), r = rng.uniform(0.01, 0.99);
      const auto g = total_loss_grad({s, f, r}, y, cfg);
      const double fd[3] = {
          (total_at(s + h, f, r, y, cfg) - total_at(s - h, f, r, y, cfg)) / (2 * h),
          (total_at(s, f + h, r, y, cfg) - total_at(s, f - h, r, y, cfg)) / (2 * h),
          (total_at(s, f, r + h, y, cfg) - total_at(s, f, r - h, y, cfg)) / (2 * h),
      };
      const double an[3] = {g.ds, g.df, g.dr};
      for (int k = 0; k < 3; ++k) {
        const double err = std::abs(an[k] - fd[k]) / std::max(1.0, std::abs(fd[k]));
        worst = std::max(worst, err);
      }
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("gradients vanish under confident agreement") {
    LossConfig cfg;
    cfg.lambda = 1.0;
    double prev = 1e300;
    for (double gap : {1e-1, 1e-2, 1e-3, 1e-4}) {
      const auto g = total_loss_grad({1.0 - gap, 1.0 - gap, 0.5}, 1, cfg);
      const double mag = std::abs(g.ds) + std::abs(g.df);
      CHECK(mag < prev);
      prev = mag;
    }
    CHECK(prev < 1e-6);
  }

  TEST_CASE("mean reduction") {
    LossConfig cfg;
    std::vector<HeadOutputs> h{{0.8, 0.6, 0.7}, {0.2, 0.3, 0.4}};
    std::vector<int> y{1, 0};
    const auto m = mean_total_loss(h, y, cfg);
    CHECK(m.total == doctest::Approx((total_loss(h[0], 1, cfg).total + total_loss(h[1], 0, cfg).total) / 2));
  }

  TEST_CASE("bce baseline") {
    for (int k = 1; k < 1000; ++k) {
      const double p = k / 1000.0;
      REQUIRE(bce_loss(p, 1) == ce(p, 1));
      REQUIRE(bce_loss(p, 0) == ce(p, 0));
    }
    CHECK(bce_loss(0.7, 0) == doctest::Approx(-std::log(0.3)).epsilon(1e-14));
    CHECK(bce_loss(0.7, 0) == doctest::Approx(1.2039728).epsilon(1e-7));
    const double h = 1e-6;
    for (double p : {0.1, 0.4, 0.9}) {
      CHECK(bce_grad(p, 1) == doctest::Approx((bce_loss(p + h, 1) - bce_loss(p - h, 1)) / (2 * h)).epsilon(1e-7));
      CHECK(bce_grad(p, 0) == doctest::Approx((bce_loss(p + h, 0) - bce_loss(p - h, 0)) / (2 * h)).epsilon(1e-7));
    }
  }

  TEST_CASE("config validation") {
    LossConfig cfg;
    cfg.lambda = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.gamma = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.alpha = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK_NOTHROW(LossConfig{}.validate());
  }
}
