#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "voxgp/icm.hpp"
#include "voxgp/rng.hpp"

using namespace voxgp;

namespace {

// Enumeration oracle: all 6 face offsets, filtered by bounds and mask.
std::vector<std::uint32_t> neighbor_oracle(const Lattice& lat, std::size_t v) {
  const auto [x, y, z] = lat.coords(v);
  std::vector<std::uint32_t> out;
  const int offs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (const auto& o : offs) {
    const int px = x + o[0], py = y + o[1], pz = z + o[2];
    if (px < 0 || px >= lat.nx() || py < 0 || py >= lat.ny() || pz < 0 || pz >= lat.nz())
      continue;
    const std::size_t u = lat.index(px, py, pz);
    if (lat.in_mask(u)) out.push_back(static_cast<std::uint32_t>(u));
  }
  return out;
}

Lattice random_lattice(Rng& rng, int nx, int ny, int nz) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(nx) * ny * nz);
  for (auto& m : mask) m = rng.uniform() < 0.7 ? 1 : 0;
  mask[0] = 1;  // guarantee a masked-in voxel
  return Lattice(nx, ny, nz, std::move(mask));
}

// Small synthetic dataset: per-voxel GP draws on a fully masked lattice.
std::vector<GpDataset> gp_voxel_data(Rng& rng, const Lattice& lat,
                                     const HyperParams& truth, int n_inputs = 7) {
  std::vector<double> inputs;
  for (int i = 0; i < n_inputs; ++i)
    inputs.push_back(static_cast<double>(i) / (n_inputs - 1));
  std::vector<GpDataset> data;
  for (std::size_t i = 0; i < lat.n_masked(); ++i)
    data.push_back(
        oracles::sample_gp_dataset(rng, KernelKind::SquaredExponential, truth, inputs));
  return data;
}

// Deterministic per-voxel datasets with a sharp interior LML maximum (a sine
// with mild noise identifies all three hyperparameters), so comparing
// maximizer locations at 1e-3 is meaningful: GP draws can produce flat series
// whose length scale sits on a plateau.
std::vector<GpDataset> identifiable_voxel_data(const Lattice& lat) {
  std::vector<GpDataset> data;
  Rng rng(909);
  for (std::size_t i = 0; i < lat.n_masked(); ++i) {
    GpDataset d;
    const double phase = 0.4 * static_cast<double>(i);
    for (int k = 0; k < 15; ++k) {
      const double x = static_cast<double>(k) / 14.0;
      d.inputs.push_back(x);
      d.targets.push_back(std::sin(2.0 * M_PI * x + phase) + 0.1 * rng.normal());
    }
    data.push_back(std::move(d));
  }
  return data;
}

}  // namespace

TEST_CASE("neighbors: counts and deterministic order") {
  const Lattice cube = Lattice::full(3, 3, 3);
  const std::size_t center = cube.index(1, 1, 1);
  const auto nbrs = cube.neighbors(center);
  REQUIRE(nbrs.size() == 6);
  // +x, -x, +y, -y, +z, -z
  CHECK(nbrs[0] == cube.index(2, 1, 1));
  CHECK(nbrs[1] == cube.index(0, 1, 1));
  CHECK(nbrs[2] == cube.index(1, 2, 1));
  CHECK(nbrs[3] == cube.index(1, 0, 1));
  CHECK(nbrs[4] == cube.index(1, 1, 2));
  CHECK(nbrs[5] == cube.index(1, 1, 0));

  CHECK(Lattice::full(1, 1, 1).neighbors(0).empty());

  const Lattice small = Lattice::full(2, 2, 2);
  CHECK(small.neighbors(small.index(0, 0, 0)).size() == 3);
}

TEST_CASE("neighbors match the enumeration oracle on random masked lattices") {
  Rng rng(101);
  for (int rep = 0; rep < 10; ++rep) {
    const Lattice lat = random_lattice(rng, 4, 5, 3);
    for (std::uint32_t v : lat.masked_ids())
      CHECK(lat.neighbors(v) == neighbor_oracle(lat, v));
  }
}

TEST_CASE("neighbor relation is symmetric") {
  Rng rng(102);
  const Lattice lat = random_lattice(rng, 5, 4, 3);
  for (std::uint32_t v : lat.masked_ids()) {
    for (std::uint32_t u : lat.neighbors(v)) {
      const auto back = lat.neighbors(u);
      CHECK(std::find(back.begin(), back.end(), v) != back.end());
    }
  }
}

TEST_CASE("CarConfig validation") {
  CarConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.t[1] = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.t[1] = 0.5;
  cfg.rho[2] = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("car_conditional_mean: hand-evaluated cases") {
  // 2x1x1 line: voxel 0 has exactly one neighbor (voxel 1)
  HyperField field(Lattice::full(2, 1, 1));
  field.at(1) = HyperParams{2.0, -1.0, 0.5};

  CarConfig cfg;
  cfg.rho = {0.5, 0.25, 1.0};
  const Eigen::Vector3d m = car_conditional_mean(field, cfg, 0);
  CHECK(m[0] == doctest::Approx(1.0));       // 0.5 * 2 / 1
  CHECK(m[1] == doctest::Approx(-0.25));
  CHECK(m[2] == doctest::Approx(0.5));

  // rho = 0 decouples the field
  cfg.rho = {0.0, 0.0, 0.0};
  CHECK(car_conditional_mean(field, cfg, 0).norm() == 0.0);

  // consensus fixed point: all neighbors share l, rho = 1
  HyperField consensus(Lattice::full(3, 3, 1), HyperParams{0.7, -0.2, 1.3});
  cfg.rho = {1.0, 1.0, 1.0};
  const Eigen::Vector3d mc = car_conditional_mean(consensus, cfg, consensus.lattice().index(1, 1, 0));
  CHECK(mc[0] == doctest::Approx(0.7));
  CHECK(mc[1] == doctest::Approx(-0.2));
  CHECK(mc[2] == doctest::Approx(1.3));

  // full-row coupling mixes components: each entry rho_i * mean of summed components
  cfg.coupling = CouplingMode::FullRowConstant;
  cfg.rho = {0.5, 1.0, 0.0};
  const Eigen::Vector3d mf = car_conditional_mean(field, cfg, 0);
  const double total = 2.0 - 1.0 + 0.5;
  CHECK(mf[0] == doctest::Approx(0.5 * total));
  CHECK(mf[1] == doctest::Approx(total));
  CHECK(mf[2] == doctest::Approx(0.0));
}

TEST_CASE("car_conditional_mean is zero for isolated voxels") {
  std::vector<std::uint8_t> mask(9, 0);
  mask[4] = 1;  // single voxel, no neighbors
  HyperField field(Lattice(3, 3, 1, mask), HyperParams{5.0, 5.0, 5.0});
  CarConfig cfg;
  CHECK(car_conditional_mean(field, cfg, 4).norm() == 0.0);
}

TEST_CASE("car_log_density: frozen values and dense oracle") {
  HyperField field(Lattice::full(2, 1, 1));
  CarConfig cfg;
  cfg.rho = {1.0, 1.0, 1.0};
  cfg.t = {1.0, 1.0, 1.0};
  field.at(1) = HyperParams{0.3, -0.4, 0.9};
  field.at(0) = field.at(1);  // l_v equals its conditional mean

  const double at_mean = car_log_density(field, cfg, 0);
  CHECK(at_mean == doctest::Approx(-2.756815599614018).epsilon(1e-12));

  // ||l - m||^2 = 2 shifts the density by exactly -1
  Eigen::Vector3d shifted = field.at(1).as_vector();
  shifted[0] += std::sqrt(2.0);
  CHECK(car_log_density_at(field, cfg, 0, shifted) ==
        doctest::Approx(-2.756815599614018 - 1.0).epsilon(1e-12));

  // random configurations against an independent dense Gaussian oracle
  Rng rng(111);
  for (int rep = 0; rep < 50; ++rep) {
    CarConfig rcfg;
    for (int i = 0; i < 3; ++i) {
      rcfg.rho[i] = 2.0 * rng.uniform() - 1.0;
      rcfg.t[i] = 0.1 + rng.uniform();
    }
    if (rng.uniform() < 0.5) rcfg.coupling = CouplingMode::FullRowConstant;
    HyperField f(Lattice::full(3, 3, 1));
    for (auto& v : f.values()) v = oracles::random_theta(rng);
    const std::size_t voxel = f.lattice().masked_ids()[rng.bounded(9)];

    Eigen::MatrixXd T0 = Eigen::MatrixXd::Zero(3, 3);
    for (int i = 0; i < 3; ++i) T0(i, i) = rcfg.t[i];
    const double expected = oracles::dense_mvn_logpdf(
        f.at(voxel).as_vector(), car_conditional_mean(f, rcfg, voxel), T0);
    CHECK(car_log_density(f, rcfg, voxel) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("icm_update: vanishing prior precision recovers the ML fit") {
  Rng rng(121);
  const Lattice lat = Lattice::full(2, 2, 1);
  const std::vector<GpDataset> data = identifiable_voxel_data(lat);

  CarConfig cfg;
  cfg.t = {1e6, 1e6, 1e6};
  HyperField field(lat);
  for (std::size_t i = 0; i < 4; ++i)
    field.values()[i] = oracles::random_theta(rng, 0.3);

  OptimizerOptions opts;
  for (std::uint32_t v : lat.masked_ids()) {
    const auto dense = static_cast<std::size_t>(lat.dense_index(v));
    const IcmUpdateResult u =
        icm_update(v, data[dense], KernelKind::SquaredExponential, field, cfg, opts);
    const VoxelFit ml =
        fit_voxel(KernelKind::SquaredExponential, data[dense], field.at(v), opts);
    CHECK((u.params.as_vector() - ml.params.as_vector()).cwiseAbs().maxCoeff() <= 1e-3);
  }
}

TEST_CASE("icm_update: dominant prior pins the update to the neighbor average") {
  Rng rng(122);
  const Lattice lat = Lattice::full(3, 1, 1);
  const std::vector<GpDataset> data =
      gp_voxel_data(rng, lat, HyperParams{0.0, 0.0, std::log(0.5)});

  CarConfig cfg;
  cfg.rho = {1.0, 1.0, 1.0};
  cfg.t = {1e-8, 1e-8, 1e-8};
  HyperField field(lat);
  field.at(0) = HyperParams{0.4, -0.3, -0.6};
  field.at(2) = HyperParams{-0.2, 0.5, -1.0};
  field.at(1) = HyperParams{1.0, 1.0, 1.0};

  OptimizerOptions opts;
  const IcmUpdateResult u =
      icm_update(1, data[1], KernelKind::SquaredExponential, field, cfg, opts);
  const Eigen::Vector3d avg =
      0.5 * (field.at(0).as_vector() + field.at(2).as_vector());
  CHECK((u.params.as_vector() - avg).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("icm_update never lowers the local conditional objective") {
  Rng rng(123);
  const Lattice lat = Lattice::full(3, 3, 1);
  const std::vector<GpDataset> data =
      gp_voxel_data(rng, lat, HyperParams{std::log(0.4), 0.0, std::log(0.3)});

  OptimizerOptions opts;
  int accepted = 0;
  for (int rep = 0; rep < 200; ++rep) {
    CarConfig cfg;
    for (int i = 0; i < 3; ++i) {
      cfg.rho[i] = 2.0 * rng.uniform() - 1.0;
      cfg.t[i] = 0.05 + rng.uniform();
    }
    HyperField field(lat);
    for (auto& v : field.values()) v = oracles::random_theta(rng, 0.8);
    const std::uint32_t voxel = lat.masked_ids()[rng.bounded(lat.n_masked())];
    const auto dense = static_cast<std::size_t>(lat.dense_index(voxel));
    const IcmUpdateResult u =
        icm_update(voxel, data[dense], KernelKind::SquaredExponential, field, cfg, opts);
    CHECK(u.objective_after >= u.objective_before);
    accepted += u.accepted ? 1 : 0;
  }
  CHECK(accepted > 0);
}

TEST_CASE("run_icm: zero sweeps returns the initialization unchanged") {
  Rng rng(124);
  const Lattice lat = Lattice::full(2, 2, 1);
  const std::vector<GpDataset> data = gp_voxel_data(rng, lat, HyperParams{});
  HyperField init(lat);
  for (auto& v : init.values()) v = oracles::random_theta(rng);

  CarConfig cfg;
  cfg.sweeps = 0;
  const HyperField out = run_icm(data, KernelKind::SquaredExponential, cfg, init, {});
  CHECK(std::memcmp(out.values().data(), init.values().data(),
                    init.values().size() * sizeof(HyperParams)) == 0);
}

TEST_CASE("run_icm: decoupled weak prior leaves the ML initialization in place") {
  Rng rng(125);
  const Lattice lat = Lattice::full(2, 2, 1);
  const std::vector<GpDataset> data = identifiable_voxel_data(lat);

  OptimizerOptions opts;
  HyperField init(lat);
  for (std::size_t i = 0; i < data.size(); ++i)
    init.values()[i] = fit_voxel(KernelKind::SquaredExponential, data[i], {}, opts).params;

  CarConfig cfg;
  cfg.rho = {0.0, 0.0, 0.0};
  cfg.t = {1e6, 1e6, 1e6};  // keep the zero-mean pull negligible
  cfg.sweeps = 3;
  const HyperField out = run_icm(data, KernelKind::SquaredExponential, cfg, init, opts);
  for (std::size_t i = 0; i < data.size(); ++i)
    CHECK((out.values()[i].as_vector() - init.values()[i].as_vector()).cwiseAbs().maxCoeff() <=
          1e-3);
}

TEST_CASE("run_icm is deterministic for a fixed seed") {
  Rng rng(126);
  const Lattice lat = Lattice::full(3, 2, 1);
  const std::vector<GpDataset> data =
      gp_voxel_data(rng, lat, HyperParams{std::log(0.4), 0.0, std::log(0.3)});
  HyperField init(lat);

  CarConfig cfg;
  cfg.seed = 77;
  cfg.sweeps = 2;
  cfg.t = {0.2, 0.2, 0.2};
  IcmReport rep1, rep2;
  const HyperField a = run_icm(data, KernelKind::SquaredExponential, cfg, init, {}, &rep1);
  const HyperField b = run_icm(data, KernelKind::SquaredExponential, cfg, init, {}, &rep2);
  CHECK(std::memcmp(a.values().data(), b.values().data(),
                    a.values().size() * sizeof(HyperParams)) == 0);
  CHECK(rep1.updates_accepted == rep2.updates_accepted);

  // and the checkerboard schedule is deterministic too
  cfg.order = IcmOrder::Checkerboard;
  const HyperField c = run_icm(data, KernelKind::SquaredExponential, cfg, init, {});
  const HyperField d = run_icm(data, KernelKind::SquaredExponential, cfg, init, {});
  CHECK(std::memcmp(c.values().data(), d.values().data(),
                    c.values().size() * sizeof(HyperParams)) == 0);
}

TEST_CASE("run_icm limit consistency: huge t converges to independent maximizers") {
  Rng rng(127);
  const Lattice lat = Lattice::full(2, 2, 1);
  const std::vector<GpDataset> data = identifiable_voxel_data(lat);

  OptimizerOptions opts;
  HyperField init(lat);
  CarConfig cfg;
  cfg.t = {1e6, 1e6, 1e6};
  cfg.sweeps = 5;
  const HyperField out = run_icm(data, KernelKind::SquaredExponential, cfg, init, opts);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const VoxelFit ml = fit_voxel(KernelKind::SquaredExponential, data[i], {}, opts);
    CHECK((out.values()[i].as_vector() - ml.params.as_vector()).cwiseAbs().maxCoeff() <= 1e-3);
  }
}

TEST_CASE("degree asymmetry counter flags irregular masks") {
  CHECK(Lattice::full(3, 3, 1).degree_asymmetric_pairs() > 0);  // corners vs edges
  // a ring of 4 voxels on a 2x2 grid: all have 2 neighbors
  CHECK(Lattice::full(2, 2, 1).degree_asymmetric_pairs() == 0);
}
