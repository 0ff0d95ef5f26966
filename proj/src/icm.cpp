#include "voxgp/icm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voxgp/rng.hpp"

namespace voxgp {

namespace {

double local_objective(std::size_t voxel, const GpDataset& data, KernelKind kind,
                       const HyperField& field, const CarConfig& cfg,
                       const Eigen::Vector3d& value, double jitter) {
  return log_marginal_likelihood(kind, HyperParams::from_vector(value), data, jitter) +
         car_log_density_at(field, cfg, voxel, value);
}

}  // namespace

IcmUpdateResult icm_update(std::size_t voxel, const GpDataset& voxel_data,
                           KernelKind kind, const HyperField& field,
                           const CarConfig& cfg, const OptimizerOptions& opts) {
  const Eigen::Vector3d current = field.at(voxel).as_vector();
  const Eigen::Vector3d prior_mean = car_conditional_mean(field, cfg, voxel);

  IcmUpdateResult out;
  out.params = field.at(voxel);
  try {
    out.objective_before =
        local_objective(voxel, voxel_data, kind, field, cfg, current, opts.jitter);
  } catch (const FactorizationFailure&) {
    out.objective_before = -std::numeric_limits<double>::infinity();
  }
  out.objective_after = out.objective_before;

  const Objective neg_posterior = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const HyperParams theta = HyperParams::from_vector(x);
    try {
      if (grad) {
        Eigen::Vector3d g = lml_gradient(kind, theta, voxel_data, opts.jitter);
        for (int i = 0; i < 3; ++i) g[i] -= (x[i] - prior_mean[i]) / cfg.t[i];
        *grad = -g;
      }
      return -local_objective(voxel, voxel_data, kind, field, cfg, x, opts.jitter);
    } catch (const FactorizationFailure&) {
      if (grad) grad->setZero();
      return std::numeric_limits<double>::infinity();
    }
  };

  OptimizeResult r = minimize(neg_posterior, current, opts);
  const double candidate_obj = -r.f;
  if (std::isfinite(candidate_obj) && candidate_obj > out.objective_before) {
    out.params = HyperParams::from_vector(r.x);
    out.objective_after = candidate_obj;
    out.accepted = true;
  }
  return out;
}

HyperField run_icm(std::span<const GpDataset> voxel_data, KernelKind kind,
                   const CarConfig& cfg, const HyperField& init,
                   const OptimizerOptions& opts, IcmReport* report) {
  cfg.validate();
  const Lattice& lat = init.lattice();
  if (voxel_data.size() != lat.n_masked())
    throw ValidationError("run_icm: voxel data does not match mask");

  HyperField field = init;
  IcmReport rep;

  std::vector<std::uint32_t> order(lat.masked_ids());
  Rng rng(derive_seed(cfg.seed, "icm"));

  for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
    if (cfg.order == IcmOrder::RandomPermutation) {
      rng.shuffle(order);
    } else {
      // Two-colour checkerboard: first-order neighbourhoods make same-colour
      // conditionals mutually independent, so each colour class may be
      // updated in any order (or concurrently) without changing the result.
      std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const auto ca = lat.coords(a), cb = lat.coords(b);
        const int pa = (ca[0] + ca[1] + ca[2]) & 1, pb = (cb[0] + cb[1] + cb[2]) & 1;
        return pa != pb ? pa < pb : a < b;
      });
    }
    for (std::uint32_t v : order) {
      const auto dense = static_cast<std::size_t>(lat.dense_index(v));
      IcmUpdateResult u = icm_update(v, voxel_data[dense], kind, field, cfg, opts);
      ++rep.updates_attempted;
      if (u.accepted) {
        ++rep.updates_accepted;
        const double delta = u.objective_after - u.objective_before;
        if (delta < 0.0) ++rep.monotonicity_violations;
        rep.min_accepted_delta = std::min(rep.min_accepted_delta, delta);
        field.at(v) = u.params;
      }
    }
    rep.sweeps_run = sweep + 1;
  }
  if (report) *report = rep;
  return field;
}

}  // namespace voxgp
