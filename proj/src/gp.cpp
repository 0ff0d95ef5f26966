#include "voxgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace voxgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void GpDataset::validate() const {
  if (inputs.empty()) throw ValidationError("GpDataset: empty inputs");
  if (inputs.size() != targets.size())
    throw ValidationError("GpDataset: inputs/targets length mismatch");
  if (!std::isfinite(mean_value)) throw ValidationError("GpDataset: non-finite mean");
  for (double v : inputs)
    if (!std::isfinite(v)) throw ValidationError("GpDataset: non-finite input");
  for (double v : targets)
    if (!std::isfinite(v)) throw ValidationError("GpDataset: non-finite target");
}

double kernel_eval(KernelKind kind, const HyperParams& theta, double xi, double xj,
                   bool include_noise) {
  const double lam2 = std::exp(2.0 * theta.log_output_scale);
  double k;
  switch (kind) {
    case KernelKind::SquaredExponential: {
      const double d = xi - xj;
      const double tau = theta.input_scale();
      k = lam2 * std::exp(-0.5 * d * d / (tau * tau));
      break;
    }
    case KernelKind::Linear:
      k = lam2 * (xi * xj);  // grouping keeps k(a,b) == k(b,a) bitwise
      break;
    default:
      k = 0.0;
  }
  if (include_noise) k += theta.noise_var();
  return k;
}

Eigen::MatrixXd kernel_matrix(KernelKind kind, const HyperParams& theta,
                              std::span<const double> xs, double jitter) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd K(n, n);
  const double diag_add = theta.noise_var() + jitter;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double k = kernel_eval(kind, theta, xs[i], xs[j], false);
      K(i, j) = k;
      K(j, i) = k;
    }
    K(i, i) += diag_add;
  }
  return K;
}

KernelFactor factor_kernel(KernelKind kind, const HyperParams& theta,
                           std::span<const double> xs, double base_jitter) {
  if (xs.empty()) throw ValidationError("factor_kernel: empty inputs");
  const double ladder[] = {base_jitter, std::max(base_jitter, 1e-6),
                           std::max(base_jitter, 1e-4)};
  for (double jitter : ladder) {
    KernelFactor f;
    f.K = kernel_matrix(kind, theta, xs, jitter);
    f.llt.compute(f.K);
    if (f.llt.info() == Eigen::Success) {
      // Eigen's LLT can report success on matrices that are only barely
      // indefinite; reject non-positive pivots explicitly.
      if (f.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
        f.jitter = jitter;
        return f;
      }
    }
  }
  throw FactorizationFailure("kernel matrix not positive definite after jitter escalation");
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> condition_gaussian(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
    std::span<const Eigen::Index> observed_idx, const Eigen::VectorXd& observed_vals) {
  const Eigen::Index n = mu.size();
  if (sigma.rows() != n || sigma.cols() != n)
    throw ValidationError("condition_gaussian: dimension mismatch");
  if (static_cast<Eigen::Index>(observed_idx.size()) != observed_vals.size())
    throw ValidationError("condition_gaussian: observed index/value mismatch");

  std::vector<bool> is_obs(static_cast<std::size_t>(n), false);
  for (Eigen::Index i : observed_idx) {
    if (i < 0 || i >= n) throw ValidationError("condition_gaussian: index out of range");
    is_obs[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Eigen::Index> unobs;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!is_obs[static_cast<std::size_t>(i)]) unobs.push_back(i);

  const auto no = static_cast<Eigen::Index>(observed_idx.size());
  const auto nu = static_cast<Eigen::Index>(unobs.size());
  Eigen::MatrixXd Soo(no, no), Suo(nu, no), Suu(nu, nu);
  Eigen::VectorXd mo(no), mu_u(nu);
  for (Eigen::Index a = 0; a < no; ++a) {
    mo[a] = mu[observed_idx[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < no; ++b)
      Soo(a, b) = sigma(observed_idx[static_cast<std::size_t>(a)],
                        observed_idx[static_cast<std::size_t>(b)]);
  }
  for (Eigen::Index a = 0; a < nu; ++a) {
    mu_u[a] = mu[unobs[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < no; ++b)
      Suo(a, b) = sigma(unobs[static_cast<std::size_t>(a)],
                        observed_idx[static_cast<std::size_t>(b)]);
    for (Eigen::Index b = 0; b < nu; ++b)
      Suu(a, b) = sigma(unobs[static_cast<std::size_t>(a)], unobs[static_cast<std::size_t>(b)]);
  }

  Eigen::LLT<Eigen::MatrixXd> llt(Soo);
  if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 0.0)
    throw FactorizationFailure("condition_gaussian: observed block not invertible");

  const Eigen::MatrixXd W = llt.solve(Suo.transpose());  // Soo^-1 Sou
  Eigen::VectorXd mean = mu_u + W.transpose() * (observed_vals - mo);
  Eigen::MatrixXd cov = Suu - Suo * W;
  // Symmetrize away round-off.
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {std::move(mean), std::move(cov)};
}

double log_marginal_likelihood(KernelKind kind, const HyperParams& theta,
                               const GpDataset& data, double base_jitter) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.size());
  KernelFactor f = factor_kernel(kind, theta, data.inputs, base_jitter);
  Eigen::VectorXd r =
      Eigen::Map<const Eigen::VectorXd>(data.targets.data(), n).array() - data.mean_value;
  const Eigen::VectorXd alpha = f.llt.solve(r);
  const double log_det = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * static_cast<double>(n) * kLog2Pi - 0.5 * log_det - 0.5 * r.dot(alpha);
}

namespace {

// dK/d(log theta_j) for the noise-inclusive kernel matrix. The jitter is a
// constant and does not enter the derivative.
Eigen::MatrixXd kernel_matrix_grad(KernelKind kind, const HyperParams& theta,
                                   std::span<const double> xs, int comp) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  switch (comp) {
    case 0: {  // log tau
      if (kind == KernelKind::SquaredExponential) {
        const double tau2 = std::exp(2.0 * theta.log_input_scale);
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j <= i; ++j) {
            const double d = xs[i] - xs[j];
            const double v =
                kernel_eval(kind, theta, xs[i], xs[j], false) * (d * d / tau2);
            D(i, j) = v;
            D(j, i) = v;
          }
      }
      break;
    }
    case 1: {  // log lambda: noise-free part scales with lambda^2
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
          const double v = 2.0 * kernel_eval(kind, theta, xs[i], xs[j], false);
          D(i, j) = v;
          D(j, i) = v;
        }
      break;
    }
    case 2: {  // log sigma
      D.diagonal().setConstant(2.0 * theta.noise_var());
      break;
    }
  }
  return D;
}

}  // namespace

Eigen::Vector3d lml_gradient(KernelKind kind, const HyperParams& theta,
                             const GpDataset& data, double base_jitter) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.size());
  KernelFactor f = factor_kernel(kind, theta, data.inputs, base_jitter);
  Eigen::VectorXd r =
      Eigen::Map<const Eigen::VectorXd>(data.targets.data(), n).array() - data.mean_value;
  const Eigen::VectorXd alpha = f.llt.solve(r);
  const Eigen::MatrixXd Kinv = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  // dL/dt_j = 1/2 tr((alpha alpha^T - K^-1) dK/dt_j)
  const Eigen::MatrixXd M = alpha * alpha.transpose() - Kinv;
  Eigen::Vector3d g;
  for (int c = 0; c < 3; ++c) {
    const Eigen::MatrixXd D = kernel_matrix_grad(kind, theta, data.inputs, c);
    g[c] = 0.5 * M.cwiseProduct(D).sum();
  }
  return g;
}

PredictiveGaussian predict(KernelKind kind, const HyperParams& theta,
                           const GpDataset& data, double x_star, bool include_noise,
                           double base_jitter) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.size());
  KernelFactor f = factor_kernel(kind, theta, data.inputs, base_jitter);
  Eigen::VectorXd r =
      Eigen::Map<const Eigen::VectorXd>(data.targets.data(), n).array() - data.mean_value;
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kstar[i] = kernel_eval(kind, theta, x_star, data.inputs[i], false);
  const Eigen::VectorXd alpha = f.llt.solve(r);
  const Eigen::VectorXd v = f.llt.solve(kstar);
  PredictiveGaussian out;
  out.mean = data.mean_value + kstar.dot(alpha);
  out.variance = kernel_eval(kind, theta, x_star, x_star, false) - kstar.dot(v);
  if (out.variance < 0.0) out.variance = 0.0;  // round-off guard
  if (include_noise) out.variance += theta.noise_var();
  return out;
}

namespace {

bool targets_constant(const GpDataset& data) {
  const double first = data.targets.front();
  for (double t : data.targets)
    if (t != first) return false;
  return true;
}

}  // namespace

VoxelFit fit_voxel(KernelKind kind, const GpDataset& data, const HyperParams& init,
                   const OptimizerOptions& opts) {
  data.validate();
  VoxelFit out;
  if (data.size() < 2 || targets_constant(data)) {
    out.params = init;
    out.params.log_noise = -opts.bound;  // floored: no residual scatter to explain
    out.status = FitStatus::DegenerateData;
    out.lml = log_marginal_likelihood(kind, out.params, data, opts.jitter);
    return out;
  }

  const Objective neg_lml = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const HyperParams theta = HyperParams::from_vector(x);
    try {
      if (grad) *grad = -lml_gradient(kind, theta, data, opts.jitter);
      return -log_marginal_likelihood(kind, theta, data, opts.jitter);
    } catch (const FactorizationFailure&) {
      if (grad) grad->setZero();
      return std::numeric_limits<double>::infinity();
    }
  };

  OptimizeResult r = minimize(neg_lml, init.as_vector(), opts);
  out.params = HyperParams::from_vector(r.x);
  out.lml = -r.f;
  out.iterations = r.iterations;
  out.status = r.status == OptStatus::Stalled ? FitStatus::Stalled : FitStatus::Ok;
  return out;
}

}  // namespace voxgp
