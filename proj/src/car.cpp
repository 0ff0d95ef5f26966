#include "voxgp/car.hpp"

#include <cmath>

namespace voxgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void CarConfig::validate() const {
  for (double ti : t)
    if (!(ti > 0.0) || !std::isfinite(ti))
      throw ValidationError("CarConfig: conditional variances must be positive");
  for (double ri : rho)
    if (!(std::abs(ri) <= 1.0))
      throw ValidationError("CarConfig: |rho| <= 1 required");
  if (sweeps < 0) throw ValidationError("CarConfig: negative sweep count");
}

HyperField::HyperField(Lattice lattice, HyperParams fill)
    : lattice_(std::move(lattice)), values_(lattice_.n_masked(), fill) {}

Eigen::Vector3d car_conditional_mean(const HyperField& field, const CarConfig& cfg,
                                     std::size_t voxel) {
  const auto nbrs = field.lattice().neighbors(voxel);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  if (nbrs.empty()) return mean;

  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (std::uint32_t u : nbrs) sum += field.at(u).as_vector();
  const double inv_n = 1.0 / static_cast<double>(nbrs.size());
  switch (cfg.coupling) {
    case CouplingMode::Diagonal:
      for (int i = 0; i < 3; ++i) mean[i] = cfg.rho[i] * inv_n * sum[i];
      break;
    case CouplingMode::FullRowConstant: {
      const double total = sum.sum();
      for (int i = 0; i < 3; ++i) mean[i] = cfg.rho[i] * inv_n * total;
      break;
    }
  }
  return mean;
}

double car_log_density_at(const HyperField& field, const CarConfig& cfg,
                          std::size_t voxel, const Eigen::Vector3d& value) {
  const Eigen::Vector3d m = car_conditional_mean(field, cfg, voxel);
  double logdet = 0.0, quad = 0.0;
  for (int i = 0; i < 3; ++i) {
    logdet += std::log(cfg.t[i]);
    const double d = value[i] - m[i];
    quad += d * d / cfg.t[i];
  }
  return -1.5 * kLog2Pi - 0.5 * logdet - 0.5 * quad;
}

double car_log_density(const HyperField& field, const CarConfig& cfg, std::size_t voxel) {
  return car_log_density_at(field, cfg, voxel, field.at(voxel).as_vector());
}

}  // namespace voxgp
