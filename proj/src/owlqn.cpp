#include "patlm/owlqn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>

#include "patlm/error.hpp"

namespace patlm {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l1_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

double inf_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

std::int64_t nonzeros(std::span<const double> x) {
  return std::count_if(x.begin(), x.end(), [](double v) { return v != 0.0; });
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

struct Correction {
  std::vector<double> s, y;
  double ys = 0.0;
  double alpha = 0.0;
};

}  // namespace

void OwlqnConfig::validate() const {
  if (memory < 1) throw ConfigError("bad_owlqn", "memory must be >= 1");
  if (l1 < 0.0) throw ConfigError("bad_owlqn", "l1 coefficient must be >= 0");
  if (!(grad_tol > 0.0) || !(armijo > 0.0) || !(backtrack > 0.0 && backtrack < 1.0)) {
    throw ConfigError("bad_owlqn", "tolerances must be positive and backtrack in (0,1)");
  }
}

std::vector<double> pseudo_gradient(std::span<const double> x, std::span<const double> grad,
                                    double l1) {
  if (x.size() != grad.size()) throw ConfigError("size_mismatch", "x and gradient differ in size");
  std::vector<double> pg(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) {
      pg[i] = grad[i] + l1;
    } else if (x[i] < 0.0) {
      pg[i] = grad[i] - l1;
    } else if (grad[i] + l1 < 0.0) {
      pg[i] = grad[i] + l1;
    } else if (grad[i] - l1 > 0.0) {
      pg[i] = grad[i] - l1;
    } else {
      pg[i] = 0.0;
    }
  }
  return pg;
}

OwlqnResult minimize_owlqn(const SmoothObjective& smooth, std::vector<double> x0,
                           const OwlqnConfig& config) {
  config.validate();
  const size_t n = x0.size();
  OwlqnResult result;
  std::vector<double> x = std::move(x0);
  std::vector<double> g(n);
  const double f = smooth(x, g);
  if (!std::isfinite(f) || !all_finite(g)) {
    throw NumericError("non_finite", "objective or gradient non-finite at the starting point");
  }
  double objective = f + config.l1 * l1_norm(x);
  std::vector<double> pg = pseudo_gradient(x, g, config.l1);
  result.log.push_back({0, objective, inf_norm(pg), nonzeros(x), 0.0});

  std::deque<Correction> history;
  std::vector<double> d(n), orthant(n), x_new(n), g_new(n);

  auto finish = [&](bool converged, bool failed, int iters) {
    result.x = x;
    result.objective = objective;
    result.iterations = iters;
    result.converged = converged;
    result.line_search_failed = failed;
    return result;
  };

  if (inf_norm(pg) <= config.grad_tol) return finish(true, false, 0);

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    // Two-loop recursion on the pseudo-gradient.
    for (size_t i = 0; i < n; ++i) d[i] = -pg[i];
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
      it->alpha = dot(it->s, d) / it->ys;
      for (size_t i = 0; i < n; ++i) d[i] -= it->alpha * it->y[i];
    }
    if (!history.empty()) {
      const auto& last = history.back();
      const double gamma = last.ys / dot(last.y, last.y);
      for (double& v : d) v *= gamma;
    }
    for (const auto& c : history) {
      const double beta = dot(c.y, d) / c.ys;
      for (size_t i = 0; i < n; ++i) d[i] += (c.alpha - beta) * c.s[i];
    }
    // Keep only components that descend along the pseudo-gradient.
    for (size_t i = 0; i < n; ++i) {
      if (d[i] * pg[i] >= 0.0) d[i] = 0.0;
    }
    if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) {
      for (size_t i = 0; i < n; ++i) d[i] = -pg[i];
    }
    for (size_t i = 0; i < n; ++i) {
      orthant[i] = x[i] != 0.0 ? (x[i] > 0.0 ? 1.0 : -1.0) : (pg[i] < 0.0 ? 1.0 : (pg[i] > 0.0 ? -1.0 : 0.0));
    }

    double step = history.empty() ? 1.0 / std::sqrt(dot(pg, pg)) : 1.0;
    bool accepted = false;
    double f_new = 0.0, objective_new = 0.0;
    for (int k = 0; k < config.max_backtracks; ++k) {
      for (size_t i = 0; i < n; ++i) {
        const double v = x[i] + step * d[i];
        // Components leaving the chosen orthant are clamped to exactly zero.
        x_new[i] = v * orthant[i] > 0.0 ? v : 0.0;
      }
      f_new = smooth(x_new, g_new);
      if (std::isfinite(f_new) && all_finite(g_new)) {
        objective_new = f_new + config.l1 * l1_norm(x_new);
        double decrease = 0.0;
        for (size_t i = 0; i < n; ++i) decrease += pg[i] * (x_new[i] - x[i]);
        if (objective_new <= objective + config.armijo * decrease && objective_new <= objective) {
          accepted = true;
          break;
        }
      }
      step *= config.backtrack;
    }
    if (!accepted) return finish(false, true, iter - 1);

    Correction c;
    c.s.resize(n);
    c.y.resize(n);
    for (size_t i = 0; i < n; ++i) {
      c.s[i] = x_new[i] - x[i];
      c.y[i] = g_new[i] - g[i];
    }
    c.ys = dot(c.s, c.y);
    x.swap(x_new);
    g.swap(g_new);
    objective = objective_new;
    pg = pseudo_gradient(x, g, config.l1);
    if (c.ys > 1e-300 * std::max(1.0, dot(c.y, c.y))) {
      history.push_back(std::move(c));
      if (static_cast<int>(history.size()) > config.memory) history.pop_front();
    }
    const double pg_norm = inf_norm(pg);
    result.log.push_back({iter, objective, pg_norm, nonzeros(x), step});
    if (pg_norm <= config.grad_tol) return finish(true, false, iter);
  }
  return finish(false, false, config.max_iter);
}

void write_iteration_log(std::ostream& out, const std::vector<OwlqnIteration>& log) {
  out << "iter,objective,pg_norm,nonzeros,step\n";
  out.precision(17);
  for (const auto& e : log) {
    out << e.iter << ',' << e.objective << ',' << e.pg_norm << ',' << e.nonzeros << ','
        << e.step << '\n';
  }
}

}  // namespace patlm
