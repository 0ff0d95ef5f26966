#include "voxgp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace voxgp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Eval {
  double f = kInf;
  Eigen::VectorXd g;
};

// Strong-Wolfe line search (bracket + zoom). phi(a) = f(x + a*d).
// Returns the accepted step, or 0 if no acceptable step was found.
// `amax` caps the step so the iterate stays inside the box.
class LineSearch {
 public:
  LineSearch(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& d,
             double f0, double dphi0, const OptimizerOptions& opts, int* evals)
      : f_(f), x_(x), d_(d), f0_(f0), dphi0_(dphi0), opts_(opts), evals_(evals) {}

  // On success fills `out` with the evaluation at the accepted step.
  double search(double a_init, double amax, Eval* out) {
    double a_prev = 0.0, f_prev = f0_, dphi_prev = dphi0_;
    double a = std::min(a_init, amax);
    if (a <= 0.0) return 0.0;
    for (int it = 0; it < opts_.max_line_search; ++it) {
      Eval e = eval(a);
      const double dphi = std::isfinite(e.f) ? e.g.dot(d_) : kInf;
      if (e.f > f0_ + opts_.wolfe_c1 * a * dphi0_ || (it > 0 && e.f >= f_prev) ||
          !std::isfinite(e.f)) {
        return zoom(a_prev, f_prev, dphi_prev, a, out);
      }
      if (std::abs(dphi) <= -opts_.wolfe_c2 * dphi0_) {
        *out = std::move(e);
        return a;
      }
      if (dphi >= 0.0) {
        return zoom(a, e.f, dphi, a_prev, out);
      }
      if (a >= amax) {
        // Boundary step still satisfies sufficient decrease; take it.
        *out = std::move(e);
        return a;
      }
      a_prev = a;
      f_prev = e.f;
      dphi_prev = dphi;
      a = std::min(2.0 * a, amax);
    }
    return 0.0;
  }

 private:
  Eval eval(double a) {
    Eval e;
    e.g.resize(x_.size());
    ++*evals_;
    e.f = f_(x_ + a * d_, &e.g);
    return e;
  }

  // `alo` satisfies sufficient decrease, `ahi` does not (or is worse).
  double zoom(double alo, double flo, double dphilo, double ahi, Eval* out) {
    for (int it = 0; it < opts_.max_line_search; ++it) {
      const double a = 0.5 * (alo + ahi);
      if (!(a > 0.0) || std::abs(ahi - alo) < 1e-16 * std::max(1.0, std::abs(alo))) break;
      Eval e = eval(a);
      const double dphi = std::isfinite(e.f) ? e.g.dot(d_) : kInf;
      if (e.f > f0_ + opts_.wolfe_c1 * a * dphi0_ || e.f >= flo || !std::isfinite(e.f)) {
        ahi = a;
      } else {
        if (std::abs(dphi) <= -opts_.wolfe_c2 * dphi0_) {
          *out = std::move(e);
          return a;
        }
        if (dphi * (ahi - alo) >= 0.0) ahi = alo;
        alo = a;
        flo = e.f;
        dphilo = dphi;
      }
    }
    // Wolfe failed; fall back to alo if it improves on the start point.
    if (alo > 0.0 && flo < f0_) {
      Eval e = eval(alo);
      if (std::isfinite(e.f) && e.f < f0_) {
        *out = std::move(e);
        return alo;
      }
    }
    return 0.0;
  }

  const Objective& f_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& d_;
  double f0_, dphi0_;
  const OptimizerOptions& opts_;
  int* evals_;
};

}  // namespace

OptimizeResult minimize(const Objective& f, Eigen::VectorXd x0,
                        const OptimizerOptions& opts) {
  const auto n = x0.size();
  x0 = x0.cwiseMax(-opts.bound).cwiseMin(opts.bound);

  OptimizeResult res;
  res.x = x0;
  res.grad.resize(n);
  ++res.evaluations;
  res.f = f(x0, &res.grad);
  if (!std::isfinite(res.f)) {
    res.status = OptStatus::Stalled;
    return res;
  }

  Eigen::VectorXd x = x0, g = res.grad, d = -g;
  double fx = res.f;
  double a_prev = 0.0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    res.iterations = iter + 1;
    if (g.norm() <= opts.grad_tol) {
      res.status = OptStatus::Converged;
      return res;
    }
    double dphi0 = g.dot(d);
    if (!(dphi0 < 0.0)) {  // not a descent direction: restart
      d = -g;
      dphi0 = g.dot(d);
      if (!(dphi0 < 0.0)) {
        res.status = OptStatus::Converged;  // gradient numerically zero
        return res;
      }
    }

    // Cap the step at the box boundary along d.
    double amax = kInf;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] > 0.0) amax = std::min(amax, (opts.bound - x[i]) / d[i]);
      else if (d[i] < 0.0) amax = std::min(amax, (-opts.bound - x[i]) / d[i]);
    }
    if (!(amax > 0.0)) {
      // Pinned at the boundary along d: restart with the projected steepest
      // direction (blocked coordinates zeroed). Nothing left -> stall.
      Eigen::VectorXd proj = -g;
      for (Eigen::Index i = 0; i < n; ++i) {
        if ((x[i] >= opts.bound && proj[i] > 0.0) || (x[i] <= -opts.bound && proj[i] < 0.0))
          proj[i] = 0.0;
      }
      if (proj.norm() <= opts.grad_tol || (proj - d).norm() == 0.0) {
        res.status = proj.norm() <= opts.grad_tol ? OptStatus::Converged : OptStatus::Stalled;
        return res;
      }
      d = proj;
      continue;
    }

    const double a_init = (iter == 0 || a_prev <= 0.0)
                              ? std::min(1.0, 1.0 / std::max(1e-12, g.norm()))
                              : std::min(1.0, 2.0 * a_prev);
    Eval accepted;
    LineSearch ls(f, x, d, fx, dphi0, opts, &res.evaluations);
    const double a = ls.search(a_init, amax, &accepted);
    if (a <= 0.0) {
      res.status = OptStatus::Stalled;
      return res;
    }
    a_prev = a;

    Eigen::VectorXd g_new = accepted.g;
    const double beta =
        std::max(0.0, g_new.dot(g_new - g) / std::max(1e-300, g.squaredNorm()));
    x += a * d;
    // Snap tiny boundary overshoot from floating point.
    x = x.cwiseMax(-opts.bound).cwiseMin(opts.bound);
    d = -g_new + beta * d;
    g = std::move(g_new);
    fx = accepted.f;

    if (fx < res.f) {
      res.f = fx;
      res.x = x;
      res.grad = g;
    }
  }
  res.status = g.norm() <= opts.grad_tol ? OptStatus::Converged : OptStatus::MaxIterations;
  return res;
}

}  // namespace voxgp
