#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "patlm/error.hpp"
#include "patlm/owlqn.hpp"

namespace patlm {
namespace {

double full_objective(const OwlqnResult& r, const SmoothObjective& f, double l1) {
  std::vector<double> g(r.x.size());
  double v = f(r.x, g);
  for (double x : r.x) v += l1 * std::abs(x);
  return v;
}

TEST(PseudoGradient, Examples) {
  EXPECT_EQ(pseudo_gradient(std::vector<double>{0.0}, std::vector<double>{0.5}, 1.0)[0], 0.0);
  EXPECT_DOUBLE_EQ(pseudo_gradient(std::vector<double>{2.0}, std::vector<double>{0.1}, 1.0)[0], 1.1);
  EXPECT_DOUBLE_EQ(pseudo_gradient(std::vector<double>{0.0}, std::vector<double>{-3.0}, 1.0)[0], -2.0);
  EXPECT_DOUBLE_EQ(pseudo_gradient(std::vector<double>{0.0}, std::vector<double>{3.0}, 1.0)[0], 2.0);
  EXPECT_DOUBLE_EQ(pseudo_gradient(std::vector<double>{-1.0}, std::vector<double>{0.25}, 1.0)[0], -0.75);
}

TEST(Minimize, UnregularizedQuadratic) {
  const SmoothObjective f = [](std::span<const double> x, std::span<double> g) {
    double v = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      g[i] = x[i] - 1.0;
      v += 0.5 * g[i] * g[i];
    }
    return v;
  };
  OwlqnConfig cfg;
  cfg.grad_tol = 1e-10;
  const auto r = minimize_owlqn(f, std::vector<double>(5, -4.0), cfg);
  for (double x : r.x) EXPECT_NEAR(x, 1.0, 1e-8);
  EXPECT_TRUE(r.converged);
}

TEST(Minimize, SoftThresholdToZero) {
  const SmoothObjective f = [](std::span<const double> x, std::span<double> g) {
    g[0] = x[0];
    return 0.5 * x[0] * x[0];
  };
  OwlqnConfig cfg;
  cfg.l1 = 2.0;
  const auto r = minimize_owlqn(f, {5.0}, cfg);
  EXPECT_EQ(r.x[0], 0.0);
  EXPECT_FALSE(std::signbit(r.x[0]) && r.x[0] != 0.0);
}

TEST(Minimize, SoftThresholdShift) {
  const SmoothObjective f = [](std::span<const double> x, std::span<double> g) {
    g[0] = x[0] - 3.0;
    return 0.5 * g[0] * g[0];
  };
  OwlqnConfig cfg;
  cfg.l1 = 1.0;
  cfg.grad_tol = 1e-12;
  const auto r = minimize_owlqn(f, {0.0}, cfg);
  EXPECT_NEAR(r.x[0], 2.0, 1e-8);
}

// Random convex quadratic with a known unregularized solution.
struct Quadratic {
  std::vector<std::vector<double>> a;  // symmetric positive definite
  std::vector<double> b;

  double operator()(std::span<const double> x, std::span<double> g) const {
    double v = 0;
    for (size_t i = 0; i < b.size(); ++i) {
      double ax = 0;
      for (size_t j = 0; j < b.size(); ++j) ax += a[i][j] * x[j];
      g[i] = ax - b[i];
      v += 0.5 * x[i] * ax - b[i] * x[i];
    }
    return v;
  }
};

Quadratic random_quadratic(std::mt19937_64& rng, size_t n) {
  std::normal_distribution<double> d;
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (auto& row : m) {
    for (auto& v : row) v = d(rng);
  }
  Quadratic q;
  q.a.assign(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      for (size_t k = 0; k < n; ++k) q.a[i][j] += m[k][i] * m[k][j];
    }
    q.a[i][i] += 0.5;
  }
  q.b.resize(n);
  for (auto& v : q.b) v = d(rng);
  return q;
}

TEST(Minimize, PlainLbfgsMatchesGradientDescent) {
  std::mt19937_64 rng(41);
  const auto q = random_quadratic(rng, 6);
  OwlqnConfig cfg;
  cfg.grad_tol = 1e-11;
  const auto r = minimize_owlqn(q, std::vector<double>(6, 0.0), cfg);
  // Reference: plain gradient descent with a safe step, run to convergence.
  double trace = 0;
  for (size_t i = 0; i < 6; ++i) trace += q.a[i][i];
  std::vector<double> x(6, 0.0), g(6);
  for (int it = 0; it < 200000; ++it) {
    q(x, g);
    for (size_t i = 0; i < 6; ++i) x[i] -= g[i] / trace;
  }
  for (size_t i = 0; i < 6; ++i) EXPECT_NEAR(r.x[i], x[i], 1e-6);
}

TEST(Minimize, MonotoneObjectiveAndExactZeros) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = random_quadratic(rng, 8);
    OwlqnConfig cfg;
    cfg.l1 = 0.5 + static_cast<double>(trial % 5);
    const auto r = minimize_owlqn(q, std::vector<double>(8, 1.0), cfg);
    for (size_t i = 1; i < r.log.size(); ++i) EXPECT_LE(r.log[i].objective, r.log[i - 1].objective);
    EXPECT_NEAR(full_objective(r, q, cfg.l1), r.objective, 1e-12 * (1 + std::abs(r.objective)));
    // Optimality: zero components have |g| <= l1, others g = -l1 sign(x).
    std::vector<double> g(8);
    q(r.x, g);
    const auto pg = pseudo_gradient(r.x, g, cfg.l1);
    for (size_t i = 0; i < 8; ++i) {
      EXPECT_LE(std::abs(pg[i]), 1e-4);
      if (std::abs(r.x[i]) < 1e-12) EXPECT_EQ(r.x[i], 0.0);
    }
  }
}

TEST(Minimize, LargeL1ZeroesEverything) {
  std::mt19937_64 rng(43);
  const auto q = random_quadratic(rng, 5);
  double max_b = 0;
  for (double v : q.b) max_b = std::max(max_b, std::abs(v));
  OwlqnConfig cfg;
  cfg.l1 = max_b + 1.0;
  const auto r = minimize_owlqn(q, std::vector<double>(5, 2.0), cfg);
  for (double x : r.x) EXPECT_EQ(x, 0.0);
}

TEST(Minimize, NonFiniteStartThrows) {
  const SmoothObjective f = [](std::span<const double>, std::span<double> g) {
    g[0] = 0;
    return std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_THROW(minimize_owlqn(f, {1.0}, OwlqnConfig{}), NumericError);
}

TEST(Minimize, NonFiniteTrialPointsBacktrack) {
  // log-barrier: infinite outside x > 0.
  const SmoothObjective f = [](std::span<const double> x, std::span<double> g) {
    if (x[0] <= 0) {
      g[0] = 0;
      return std::numeric_limits<double>::infinity();
    }
    g[0] = 1.0 - 1.0 / x[0];
    return x[0] - std::log(x[0]);
  };
  OwlqnConfig cfg;
  cfg.grad_tol = 1e-9;
  const auto r = minimize_owlqn(f, {20.0}, cfg);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
}

TEST(Minimize, ConfigValidation) {
  OwlqnConfig cfg;
  cfg.memory = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.l1 = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.grad_tol = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(IterationLog, CsvHeader) {
  std::ostringstream out;
  write_iteration_log(out, {OwlqnIteration{0, 1.5, 0.25, 3, 0.0}});
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "iter,objective,pg_norm,nonzeros,step");
}

}  // namespace
}  // namespace patlm
