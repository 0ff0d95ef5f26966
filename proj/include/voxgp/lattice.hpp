#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "voxgp/errors.hpp"

namespace voxgp {

// 3-D voxel lattice with an in-brain mask. Linear indices are x-fastest:
// idx = x + nx*(y + ny*z). First-order (face) neighbourhoods.
class Lattice {
 public:
  Lattice(int nx, int ny, int nz, std::vector<std::uint8_t> mask);

  // Fully masked-in lattice.
  static Lattice full(int nx, int ny, int nz);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  std::size_t n_total() const { return mask_.size(); }
  std::size_t n_masked() const { return masked_ids_.size(); }

  bool in_mask(std::size_t v) const { return mask_[v] != 0; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }

  // Linear indices of masked-in voxels, ascending.
  const std::vector<std::uint32_t>& masked_ids() const { return masked_ids_; }
  // Dense index (position within masked_ids) for a masked-in linear index;
  // -1 for masked-out voxels.
  std::int32_t dense_index(std::size_t v) const { return dense_index_[v]; }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx_) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny_) * z);
  }
  std::array<int, 3> coords(std::size_t v) const {
    const int x = static_cast<int>(v % nx_);
    const int y = static_cast<int>((v / nx_) % ny_);
    const int z = static_cast<int>(v / (static_cast<std::size_t>(nx_) * ny_));
    return {x, y, z};
  }

  // Up-to-6 face-adjacent masked-in neighbours of a masked-in voxel, in the
  // fixed order +x, -x, +y, -y, +z, -z (clipped at volume and mask edges).
  std::vector<std::uint32_t> neighbors(std::size_t v) const;

  // Number of unordered neighbour pairs (u,v) with differing neighbour
  // counts; nonzero counts break the exact CAR symmetry condition.
  std::size_t degree_asymmetric_pairs() const;

  bool operator==(const Lattice& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_ && mask_ == o.mask_;
  }

 private:
  int nx_, ny_, nz_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::uint32_t> masked_ids_;
  std::vector<std::int32_t> dense_index_;
};

}  // namespace voxgp
