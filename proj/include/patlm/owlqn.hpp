#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace patlm {

// Minimizes smooth(x) + l1 * ||x||_1 with orthant-wise L-BFGS.
struct OwlqnConfig {
  int memory = 10;
  int max_iter = 500;
  double grad_tol = 1e-5;  // on the pseudo-gradient infinity norm
  double backtrack = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 60;
  double l1 = 0.0;

  void validate() const;
};

struct OwlqnIteration {
  int iter = 0;
  double objective = 0.0;
  double pg_norm = 0.0;
  std::int64_t nonzeros = 0;
  double step = 0.0;
};

struct OwlqnResult {
  std::vector<double> x;
  double objective = 0.0;  // smooth + l1 term
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<OwlqnIteration> log;  // entry 0 is the starting point
};

// Writes smooth(x) and its gradient; returns smooth(x).
using SmoothObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

std::vector<double> pseudo_gradient(std::span<const double> x, std::span<const double> grad,
                                    double l1);

// Throws NumericError if the objective or gradient is non-finite at the
// starting point; non-finite trial points inside the line search are
// treated as insufficient decrease.
OwlqnResult minimize_owlqn(const SmoothObjective& smooth, std::vector<double> x0,
                           const OwlqnConfig& config);

// CSV: iter,objective,pg_norm,nonzeros,step
void write_iteration_log(std::ostream& out, const std::vector<OwlqnIteration>& log);

}  // namespace patlm
