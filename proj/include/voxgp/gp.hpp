#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <span>
#include <vector>

#include "voxgp/errors.hpp"
#include "voxgp/optimizer.hpp"

namespace voxgp {

// One voxel's GP hyperparameters in log space: (log tau, log lambda, log sigma)
// = (input scale, output scale, observation noise sd). Working in logs keeps
// the natural-scale parameters strictly positive.
struct HyperParams {
  double log_input_scale = 0.0;
  double log_output_scale = 0.0;
  double log_noise = 0.0;

  double input_scale() const { return std::exp(log_input_scale); }
  double output_scale() const { return std::exp(log_output_scale); }
  double noise_sd() const { return std::exp(log_noise); }
  double noise_var() const { return std::exp(2.0 * log_noise); }

  Eigen::Vector3d as_vector() const {
    return {log_input_scale, log_output_scale, log_noise};
  }
  static HyperParams from_vector(const Eigen::Vector3d& v) {
    return {v[0], v[1], v[2]};
  }
  bool finite() const {
    return std::isfinite(log_input_scale) && std::isfinite(log_output_scale) &&
           std::isfinite(log_noise);
  }
};

enum class KernelKind { SquaredExponential, Linear };

// Inputs are behavioural scores, targets per-voxel z-scores. mean_value is
// the constant prior mean m(x).
struct GpDataset {
  std::vector<double> inputs;
  std::vector<double> targets;
  double mean_value = 0.0;

  std::size_t size() const { return inputs.size(); }
  // Throws ValidationError on length mismatch, empty data, or non-finite entries.
  void validate() const;
};

struct PredictiveGaussian {
  double mean = 0.0;
  double variance = 0.0;
};

// Noise-free covariance between two inputs; include_noise adds sigma^2
// (callers pass it only when xi and xj refer to the same observation).
double kernel_eval(KernelKind kind, const HyperParams& theta, double xi, double xj,
                   bool include_noise = false);

// N x N covariance with sigma^2 + jitter on the diagonal.
Eigen::MatrixXd kernel_matrix(KernelKind kind, const HyperParams& theta,
                              std::span<const double> xs, double jitter = 0.0);

// Kernel matrix together with its Cholesky factor. Jitter escalates through
// base -> 1e-6 -> 1e-4 before FactorizationFailure is thrown.
struct KernelFactor {
  Eigen::MatrixXd K;          // noise-inclusive covariance actually factored
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;        // jitter that made the factorization succeed
};
KernelFactor factor_kernel(KernelKind kind, const HyperParams& theta,
                           std::span<const double> xs, double base_jitter = 1e-10);

// Standard Gaussian conditioning: distribution of the unobserved coordinates
// of N(mu, sigma) given sigma-ordering `observed_idx` pinned at `observed_vals`.
// Returns (conditional mean, conditional covariance) over the unobserved
// coordinates in their original order.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> condition_gaussian(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
    std::span<const Eigen::Index> observed_idx, const Eigen::VectorXd& observed_vals);

// log p(y | x, theta) = -N/2 log 2pi - 1/2 log|K| - 1/2 (y-m)^T K^-1 (y-m),
// K noise-inclusive.
double log_marginal_likelihood(KernelKind kind, const HyperParams& theta,
                               const GpDataset& data, double base_jitter = 1e-10);

// Gradient of the log marginal likelihood wrt (log tau, log lambda, log sigma).
Eigen::Vector3d lml_gradient(KernelKind kind, const HyperParams& theta,
                             const GpDataset& data, double base_jitter = 1e-10);

// Predictive distribution of the latent function at x_star. With
// include_noise the observation noise sigma^2 is added back, giving the
// data-space predictive variance.
PredictiveGaussian predict(KernelKind kind, const HyperParams& theta,
                           const GpDataset& data, double x_star,
                           bool include_noise = false, double base_jitter = 1e-10);

enum class FitStatus { Ok, DegenerateData, Stalled };

struct VoxelFit {
  HyperParams params;
  double lml = 0.0;
  FitStatus status = FitStatus::Ok;
  int iterations = 0;
};

// Maximum-likelihood hyperparameters via conjugate-gradient ascent on the LML
// in log space. Degenerate data (N < 2 or constant targets) short-circuits:
// the init is returned with log_noise clamped to the box floor and flagged.
// A stalled line search returns the best iterate reached, also flagged.
VoxelFit fit_voxel(KernelKind kind, const GpDataset& data, const HyperParams& init,
                   const OptimizerOptions& opts = {});

}  // namespace voxgp
