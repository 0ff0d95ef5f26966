#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voxgp/icm.hpp"

namespace voxgp {

// Affine map from the declared raw score range onto [0, 1]. The inverse is
// kept implicitly (raw = min + u * (max - min)) for reporting.
struct ScoreMap {
  double raw_min = 0.0;
  double raw_max = 1.0;

  double normalize(double raw) const { return (raw - raw_min) / (raw_max - raw_min); }
  double denormalize(double u) const { return raw_min + u * (raw_max - raw_min); }
  void validate() const {
    if (!(raw_max > raw_min)) throw ValidationError("ScoreMap: raw_max must exceed raw_min");
  }
};

// Whole-volume training data: one z-score volume per subject plus the raw
// behavioural scores. Volumes are full-lattice float arrays, x-fastest, with
// NaN outside the mask.
struct VolumeDataset {
  Lattice lattice;
  std::vector<double> scores;               // raw scale, one per subject
  std::vector<std::vector<float>> zvols;    // N volumes of lattice.n_total()
  ScoreMap score_map;

  std::size_t n_subjects() const { return scores.size(); }
  // Throws ValidationError on any invariant violation (N >= 2, conforming
  // dims, finite masked-in values, scores inside the declared range).
  void validate() const;

  // z-series of one masked-in voxel across subjects.
  std::vector<double> voxel_targets(std::size_t voxel) const;
};

struct FitReport {
  std::size_t n_voxels = 0;
  std::size_t n_degenerate = 0;
  std::size_t n_stalled = 0;
  double total_lml_init = 0.0;
  double total_lml_final = 0.0;
  IcmReport icm;
  std::size_t car_asymmetric_pairs = 0;
  std::vector<double> voxel_lml;        // masked order, at the final field
  std::vector<FitStatus> voxel_status;  // masked order, from initialization
};

struct FittedVolumeModel {
  KernelKind kind = KernelKind::SquaredExponential;
  HyperField field{Lattice::full(1, 1, 1)};
  CarConfig cfg;
  ScoreMap score_map;
  double mean_value = 0.0;
  double input_center = 0.0;  // subtracted from normalized inputs (linear kernel only)
  OptimizerOptions opts;
  std::vector<GpDataset> voxel_data;  // masked order, transformed inputs
  FitReport report;
};

struct PredictionVolume {
  double query_score = 0.0;  // raw scale
  bool extrapolated = false;
  std::vector<float> mean_vol;  // NaN outside mask
  std::vector<float> var_vol;
};

struct ModelComparisonMap {
  std::vector<float> log_bf_vol;    // L_a - L_b per voxel, NaN outside mask
  std::vector<float> p_linear_vol;  // posterior probability of model b
  double total_a = 0.0;
  double total_b = 0.0;
  double per_voxel_mean_log_diff = 0.0;
};

struct VolumeFitOptions {
  double mean_value = 0.0;
  OptimizerOptions optimizer;
};

// Normalized (and, for the linear kernel, mean-centered) per-voxel GP inputs.
// The centering keeps the linear kernel from privileging the score origin.
std::vector<double> transform_inputs(KernelKind kind, const VolumeDataset& dataset,
                                     double* input_center);

// Independent fit_voxel at every masked-in voxel from the shared default
// start l = 0. Failures fall back to the start and are counted.
HyperField initialize_field(const VolumeDataset& dataset, KernelKind kind,
                            const VolumeFitOptions& opts, FitReport* report = nullptr);

// initialize_field followed by cfg.sweeps ICM sweeps; records per-voxel LML
// at the final field.
FittedVolumeModel fit_volume(const VolumeDataset& dataset, KernelKind kind,
                             const CarConfig& cfg, const VolumeFitOptions& opts = {});

// Per-voxel predictive mean/variance at one raw query score. Masked-out
// voxels emit NaN. Queries outside the declared range succeed with the
// extrapolated flag set.
PredictionVolume predict_volume(const FittedVolumeModel& model, double x_star_raw,
                                bool include_noise = false);

// Sum of per-voxel LML with the field fixed at its MAP estimate.
double total_evidence(const FittedVolumeModel& model);

// Per-voxel log Bayes factor L_a - L_b and the equal-prior posterior
// probability of model b (prior odds a:b configurable).
ModelComparisonMap compare_models(const FittedVolumeModel& model_a,
                                  const FittedVolumeModel& model_b,
                                  double prior_odds_a_over_b = 1.0);

}  // namespace voxgp
