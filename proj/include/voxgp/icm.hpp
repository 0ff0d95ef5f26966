#pragma once

#include <span>

#include "voxgp/car.hpp"
#include "voxgp/gp.hpp"

namespace voxgp {

struct IcmUpdateResult {
  HyperParams params;
  double objective_before = 0.0;
  double objective_after = 0.0;
  bool accepted = false;  // false: no-op (stall or no improvement), value retained
};

// One ICM step at `voxel`: gradient ascent on
//   log_marginal_likelihood(l) + car_log_density(l | neighbours)
// starting from the current field value. The local conditional objective at
// the returned value is never below the objective at entry; failures degrade
// to a no-op.
IcmUpdateResult icm_update(std::size_t voxel, const GpDataset& voxel_data,
                           KernelKind kind, const HyperField& field,
                           const CarConfig& cfg, const OptimizerOptions& opts);

struct IcmReport {
  int sweeps_run = 0;
  std::size_t updates_attempted = 0;
  std::size_t updates_accepted = 0;
  std::size_t monotonicity_violations = 0;  // accepted updates that lowered the objective
  double min_accepted_delta = 0.0;          // most negative accepted objective change
};

// K full sweeps of serial ICM. Each sweep visits every masked-in voxel
// exactly once, in a seeded random permutation (or checkerboard order).
// Deterministic for a fixed seed. `voxel_data` is in masked (dense) order.
HyperField run_icm(std::span<const GpDataset> voxel_data, KernelKind kind,
                   const CarConfig& cfg, const HyperField& init,
                   const OptimizerOptions& opts, IcmReport* report = nullptr);

}  // namespace voxgp
