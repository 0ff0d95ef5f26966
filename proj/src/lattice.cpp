#include "voxgp/lattice.hpp"

#include <string>

namespace voxgp {

Lattice::Lattice(int nx, int ny, int nz, std::vector<std::uint8_t> mask)
    : nx_(nx), ny_(ny), nz_(nz), mask_(std::move(mask)) {
  if (nx <= 0 || ny <= 0 || nz <= 0) throw ValidationError("Lattice: non-positive dims");
  const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
  if (mask_.size() != n) throw ValidationError("Lattice: mask size mismatch");
  dense_index_.assign(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    if (mask_[v] > 1) throw ValidationError("Lattice: mask bytes must be 0/1");
    if (mask_[v]) {
      dense_index_[v] = static_cast<std::int32_t>(masked_ids_.size());
      masked_ids_.push_back(static_cast<std::uint32_t>(v));
    }
  }
  if (masked_ids_.empty()) throw ValidationError("Lattice: no masked-in voxels");
}

Lattice Lattice::full(int nx, int ny, int nz) {
  return Lattice(nx, ny, nz,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(nx) * ny * nz, 1));
}

std::vector<std::uint32_t> Lattice::neighbors(std::size_t v) const {
  const auto [x, y, z] = coords(v);
  std::vector<std::uint32_t> out;
  out.reserve(6);
  const auto push = [&](int px, int py, int pz) {
    if (px < 0 || px >= nx_ || py < 0 || py >= ny_ || pz < 0 || pz >= nz_) return;
    const std::size_t u = index(px, py, pz);
    if (mask_[u]) out.push_back(static_cast<std::uint32_t>(u));
  };
  push(x + 1, y, z);
  push(x - 1, y, z);
  push(x, y + 1, z);
  push(x, y - 1, z);
  push(x, y, z + 1);
  push(x, y, z - 1);
  return out;
}

std::size_t Lattice::degree_asymmetric_pairs() const {
  std::vector<std::uint32_t> degree(n_total(), 0);
  for (std::uint32_t v : masked_ids_)
    degree[v] = static_cast<std::uint32_t>(neighbors(v).size());
  std::size_t count = 0;
  for (std::uint32_t v : masked_ids_) {
    for (std::uint32_t u : neighbors(v)) {
      if (u > v && degree[u] != degree[v]) ++count;
    }
  }
  return count;
}

}  // namespace voxgp
