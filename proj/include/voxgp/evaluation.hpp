#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voxgp/volume.hpp"

namespace voxgp {

// Disease-stage discretisation: ordered segments (upper_bound_inclusive,
// representative). A score falls into the first segment whose bound covers
// it; scores above all bounds either pass through unchanged (when enabled)
// or raise UncoveredScore.
struct BinningRule {
  struct Segment {
    double upper_bound;     // inclusive
    double representative;
  };
  std::vector<Segment> segments;
  bool passthrough_above = false;

  // Throws ValidationError unless bounds are strictly increasing.
  void validate() const;
  // True when all representatives are equally spaced (the design requirement
  // for stage comparability); callers warn when a custom rule violates it.
  bool equidistant_representatives() const;

  double apply(double score) const;
};

// The paper-style MMSE rule: <=26 -> 24, 27..29 -> 27, 30 -> 30.
BinningRule mmse_default_rule();

// Parses "26:24,29:27,30:30" (upper:representative pairs).
BinningRule parse_binning_rule(const std::string& text);

std::vector<double> apply_binning(const std::vector<double>& scores, const BinningRule& rule);

struct CvEntry {
  int subject = 0;
  double score = 0.0;           // raw held-out score
  double representative = 0.0;  // training input assigned to this subject
  double distance = 0.0;        // |score - representative|
  double pred_logdensity = 0.0; // mean per-voxel predictive log density
  bool failed = false;
};

struct CvReport {
  std::string model_label;
  std::vector<CvEntry> entries;   // one per subject
  double overall_mean = 0.0;      // over non-failed folds
};

// Leave-one-out over subjects: each fold refits the full spatial model on
// the remaining N-1 subjects (inputs binned when a rule is supplied) and
// scores the held-out z-volume under the noise-inclusive predictive density.
// Per-fold failures are marked, not fatal.
CvReport loo_cv(const VolumeDataset& dataset, KernelKind kind, const CarConfig& cfg,
                const std::optional<BinningRule>& binning,
                const VolumeFitOptions& opts = {}, std::string model_label = {});

struct DistanceBucket {
  double distance = 0.0;
  int n = 0;
  double mean_continuous = 0.0;
  double mean_binned = 0.0;
};

// Groups subjects by their binned-model distance-to-representative and
// reports each model's mean predictive log density per bucket. Both reports
// must cover the same subjects.
std::vector<DistanceBucket> distance_profile(const CvReport& report_cont,
                                             const CvReport& report_binned);

}  // namespace voxgp
