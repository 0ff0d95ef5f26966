#pragma once

#include <Eigen/Core>
#include <functional>

namespace voxgp {

struct OptimizerOptions {
  int max_iter = 100;
  double grad_tol = 1e-5;   // stop when ||grad||_2 <= grad_tol
  double bound = 10.0;      // box guard: |x_i| <= bound
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.1;
  int max_line_search = 30;
  double jitter = 1e-10;    // base jitter handed to kernel factorizations
};

enum class OptStatus { Converged, MaxIterations, Stalled };

struct OptimizeResult {
  Eigen::VectorXd x;      // best iterate seen
  double f = 0.0;         // objective at x
  Eigen::VectorXd grad;   // gradient at x
  int iterations = 0;
  int evaluations = 0;
  OptStatus status = OptStatus::MaxIterations;
};

// Objective callback: returns f(x) and, when grad != nullptr, fills the
// gradient. May return +inf to reject a region (treated as infeasible).
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd* grad)>;

// Minimizes f with Polak-Ribiere+ conjugate gradients and a strong-Wolfe
// line search, keeping iterates inside the [-bound, bound] box. The best
// iterate is tracked, so the returned f never exceeds f(x0).
OptimizeResult minimize(const Objective& f, Eigen::VectorXd x0,
                        const OptimizerOptions& opts);

}  // namespace voxgp
