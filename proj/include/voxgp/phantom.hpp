#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxgp/rng.hpp"
#include "voxgp/volume.hpp"

namespace voxgp {

enum class NoiseModel { White, Ar1 };

// Shape of the score-to-amplitude dependence injected into the regions.
// CrossFade is the standard phantom: region A scales with alpha, region B
// with 1-alpha. LinearRamp injects a trend linear in (alpha - mean score),
// equal and opposite in the two regions.
enum class SignalProfile { CrossFade, LinearRamp };

struct PhantomConfig {
  int nx = 12, ny = 24, nz = 1;
  int n_runs = 8;
  int run_length = 48;  // must be a multiple of the 48-sample stimulus period
  std::vector<double> scores = {0.0, 0.1, 0.3, 0.7, 0.8, 0.9, 1.0};
  double m_fraction = 1.0;
  std::vector<std::uint32_t> region_a;  // linear voxel indices
  std::vector<std::uint32_t> region_b;
  NoiseModel noise = NoiseModel::Ar1;
  double ar1_phi = 0.3;
  SignalProfile profile = SignalProfile::CrossFade;
  std::uint64_t seed = 0;

  std::size_t n_voxels() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  int series_length() const { return n_runs * run_length; }
  // Throws ValidationError: regions must be disjoint and inside the volume,
  // scores in [0,1], run_length a positive multiple of 48.
  void validate() const;
};

// Default 12x24x1 patch with two disjoint 4x6 rectangular regions.
PhantomConfig default_phantom_config();

// Per-voxel time series of one simulated subject (voxel-major storage).
struct SubjectSeries {
  double alpha = 0.0;
  std::size_t n_voxels = 0;
  int length = 0;
  std::vector<double> data;  // n_voxels * length

  double* voxel(std::size_t v) { return data.data() + v * static_cast<std::size_t>(length); }
  const double* voxel(std::size_t v) const {
    return data.data() + v * static_cast<std::size_t>(length);
  }
};

// Periodic on/off stimulus: each 48-sample period is 12 off, 24 on, 12 off.
int reference_function(int t);

// Residuals of an intercept+slope least-squares fit (one run at a time).
std::vector<double> detrend_run(std::span<const double> series);

// Scales to unit sample variance; throws ZeroVariance when there is nothing
// to scale.
std::vector<double> standardize(std::span<const double> series);

// beta_eff = alpha * [v in A] * beta_v + (1-alpha) * [v in B] * beta_v with
// beta_v = m * sigma_v (the cross-fade injection).
double effective_beta(double alpha, std::uint32_t voxel, const PhantomConfig& cfg,
                      double sigma_v);

// Baseline noise -> per-run detrend -> standardize -> inject the reference
// function at the profile-dependent amplitude.
SubjectSeries generate_subject(const PhantomConfig& cfg, double alpha, Rng& rng);

// Voxel-wise OLS of the series on [1, reference]; z = beta_hat / se(beta_hat).
std::vector<float> glm_zscores(const SubjectSeries& subject, const PhantomConfig& cfg);

// One z-volume per score; lattice mask covers the whole patch.
VolumeDataset generate_population(const PhantomConfig& cfg);

// 0 = background, 1 = region A, 2 = region B.
std::vector<float> ground_truth_labels(const PhantomConfig& cfg);

}  // namespace voxgp
