#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxgp/car.hpp"
#include "voxgp/volume.hpp"

namespace voxgp {

// I/O failure distinct from format violations (exit code 3 vs 4 at the CLI).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// GPV1/GPH1 container: magic, four little-endian u32 dims, mask bytes
// (x-fastest), then `count` float32 volumes. Masked-out voxels hold one
// canonical quiet NaN. File length is exact:
// 20 + nx*ny*nz*(1 + 4*count) bytes.
struct VolumeFileData {
  std::array<char, 4> magic{};
  std::uint32_t nx = 0, ny = 0, nz = 0, count = 0;
  std::vector<std::uint8_t> mask;
  std::vector<std::vector<float>> volumes;
};

inline constexpr char kMagicGpv1[4] = {'G', 'P', 'V', '1'};
inline constexpr char kMagicGph1[4] = {'G', 'P', 'H', '1'};

float canonical_nan();

// Throws FormatError (with the first offending byte offset) on structural
// violations, IoError when the file cannot be read.
VolumeFileData read_volume_file(const std::filesystem::path& path,
                                const char expected_magic[4]);

// Atomic (temp file + rename). Non-finite and masked-out entries are
// serialized as the canonical quiet NaN.
void write_volume_file(const std::filesystem::path& path, const char magic[4],
                       const Lattice& lattice,
                       const std::vector<std::vector<float>>& volumes);

void write_gpv1(const std::filesystem::path& path, const Lattice& lattice,
                const std::vector<std::vector<float>>& volumes);
VolumeFileData read_gpv1(const std::filesystem::path& path);

void write_gph1(const std::filesystem::path& path, const HyperField& field);
HyperField read_gph1(const std::filesystem::path& path);

Lattice lattice_from_file(const VolumeFileData& data);

// Scores CSV: header "subject,score", one row per subject.
void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<double>& scores);
std::vector<double> read_scores_csv(const std::filesystem::path& path);

// Plain-text key=value run configuration. Unknown keys are rejected; values
// parse locale-independently. Blank lines and '#' comments are permitted.
struct RunConfig {
  KernelKind kernel = KernelKind::SquaredExponential;
  std::array<double, 3> rho = {1.0, 1.0, 1.0};
  std::array<double, 3> t = {0.5, 0.5, 0.5};
  int sweeps = 5;
  std::uint64_t seed = 0;
  double jitter = 1e-10;
  CouplingMode coupling = CouplingMode::Diagonal;
  double mean = 0.0;
  int opt_max_iter = 100;
  double opt_tol = 1e-5;
  double score_min = 0.0;
  double score_max = 1.0;

  CarConfig car_config() const;
  VolumeFitOptions fit_options() const;
  ScoreMap score_map() const { return {score_min, score_max}; }
};

RunConfig parse_run_config_text(const std::string& text);
RunConfig read_run_config(const std::filesystem::path& path);

// Shortest round-trip decimal representation (std::to_chars).
std::string format_double(double v);

}  // namespace voxgp
