#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace voxgp {

// Cholesky factorization failed even after jitter escalation; usually a
// symptom of degenerate hyperparameters (duplicate inputs with no noise).
struct FactorizationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input data violates a dataset invariant (lengths, finiteness, ranges).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroVariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A score is not covered by any segment of a binning rule.
struct UncoveredScore : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SubjectMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MaskMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structural violation in a GPV1/GPH1 file. `offset` is the byte position
// of the first offending byte.
struct FormatError : std::runtime_error {
  FormatError(const std::string& what, std::size_t offset_)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset_) + ")"),
        offset(offset_) {}
  std::size_t offset;
};

}  // namespace voxgp
