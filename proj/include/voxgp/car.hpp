#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>

#include "voxgp/gp.hpp"
#include "voxgp/lattice.hpp"

namespace voxgp {

// How the weight matrix R couples hyperparameter components across
// neighbours. Diagonal couples each component only to itself; FullRowConstant
// uses a constant-row R (row i is rho_i everywhere), mixing all components
// into each conditional mean.
enum class CouplingMode { Diagonal, FullRowConstant };

enum class IcmOrder { RandomPermutation, Checkerboard };

// Parameters of the multivariate CAR prior over the log-hyperparameter field,
// plus the ICM schedule. B0 = R / |N(v)|, T0 = diag(t).
struct CarConfig {
  std::array<double, 3> rho = {1.0, 1.0, 1.0};
  std::array<double, 3> t = {0.5, 0.5, 0.5};
  CouplingMode coupling = CouplingMode::Diagonal;
  IcmOrder order = IcmOrder::RandomPermutation;
  int sweeps = 5;
  std::uint64_t seed = 0;

  // Throws ValidationError unless t_i > 0 and |rho_i| <= 1.
  void validate() const;
};

// Fitted per-voxel log-hyperparameters over the masked-in lattice.
class HyperField {
 public:
  HyperField(Lattice lattice, HyperParams fill = {});

  const Lattice& lattice() const { return lattice_; }

  const HyperParams& at(std::size_t voxel) const {
    return values_[static_cast<std::size_t>(lattice_.dense_index(voxel))];
  }
  HyperParams& at(std::size_t voxel) {
    return values_[static_cast<std::size_t>(lattice_.dense_index(voxel))];
  }
  // Dense (masked-order) storage, aligned with lattice().masked_ids().
  const std::vector<HyperParams>& values() const { return values_; }
  std::vector<HyperParams>& values() { return values_; }

 private:
  Lattice lattice_;
  std::vector<HyperParams> values_;
};

// Conditional prior mean sum_{v' in N(v)} B0 l_{v'}; the zero vector when v
// has no neighbours.
Eigen::Vector3d car_conditional_mean(const HyperField& field, const CarConfig& cfg,
                                     std::size_t voxel);

// log p(l_v | l_{-v}) under the diagonal-T0 CAR conditional.
double car_log_density(const HyperField& field, const CarConfig& cfg, std::size_t voxel);

// Same density evaluated at an arbitrary candidate value for l_v (the field
// supplies only the neighbours).
double car_log_density_at(const HyperField& field, const CarConfig& cfg,
                          std::size_t voxel, const Eigen::Vector3d& value);

}  // namespace voxgp
