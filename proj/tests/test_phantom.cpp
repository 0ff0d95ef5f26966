#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "voxgp/phantom.hpp"

using namespace voxgp;

namespace {

double pearson_with_reference(const double* y, int T) {
  double xm = 0.0, ym = 0.0;
  for (int t = 0; t < T; ++t) {
    xm += reference_function(t);
    ym += y[t];
  }
  xm /= T;
  ym /= T;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int t = 0; t < T; ++t) {
    const double dx = reference_function(t) - xm;
    const double dy = y[t] - ym;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("reference function: 12 off, 24 on, 12 off, periodic") {
  CHECK(reference_function(0) == 0);
  CHECK(reference_function(11) == 0);
  CHECK(reference_function(12) == 1);
  CHECK(reference_function(35) == 1);
  CHECK(reference_function(36) == 0);
  CHECK(reference_function(47) == 0);
  CHECK(reference_function(48) == 0);  // period restart
  CHECK(reference_function(60) == 1);

  // duty cycle is exactly 1/2 over any whole period
  for (int start : {0, 48, 96}) {
    int on = 0;
    for (int t = start; t < start + 48; ++t) on += reference_function(t);
    CHECK(on == 24);
  }
}

TEST_CASE("detrend_run removes exact lines and is idempotent") {
  std::vector<double> line(48);
  for (std::size_t i = 0; i < line.size(); ++i) line[i] = 2.0 * static_cast<double>(i) + 3.0;
  for (double r : detrend_run(line)) CHECK(std::abs(r) <= 1e-10);

  const std::vector<double> constant(48, 5.0);
  for (double r : detrend_run(constant)) CHECK(std::abs(r) <= 1e-12);

  Rng rng(1);
  std::vector<double> noise(48);
  for (double& x : noise) x = rng.normal();
  const std::vector<double> resid = detrend_run(noise);
  // residuals orthogonal to [1, t] (normal equations)
  double dot1 = 0.0, dott = 0.0;
  for (std::size_t i = 0; i < resid.size(); ++i) {
    dot1 += resid[i];
    dott += resid[i] * static_cast<double>(i);
  }
  CHECK(std::abs(dot1) <= 1e-10);
  CHECK(std::abs(dott) <= 1e-8);

  const std::vector<double> twice = detrend_run(resid);
  for (std::size_t i = 0; i < resid.size(); ++i)
    CHECK(std::abs(twice[i] - resid[i]) <= 1e-12);
}

TEST_CASE("standardize scales to unit sample variance") {
  Rng rng(2);
  std::vector<double> s(100);
  for (double& x : s) x = 2.0 * rng.normal();  // variance ~4
  const std::vector<double> out = standardize(s);
  double mean = mean_of(out);
  double ss = 0.0;
  for (double x : out) ss += (x - mean) * (x - mean);
  CHECK(ss / 99.0 == doctest::Approx(1.0).epsilon(1e-10));
  // variance-4 input: amplitudes roughly halved
  CHECK(std::abs(out[0] / s[0] - 0.5) <= 0.2);

  const std::vector<double> again = standardize(out);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(again[i] == doctest::Approx(out[i]).epsilon(1e-12));

  const std::vector<double> flat(10, 3.0);
  CHECK_THROWS_AS(standardize(flat), ZeroVariance);
}

TEST_CASE("effective_beta: hand values and the cross-fade conservation identity") {
  PhantomConfig cfg = default_phantom_config();
  const std::uint32_t in_a = cfg.region_a.front();
  const std::uint32_t in_b = cfg.region_b.front();
  const std::uint32_t outside = 0;

  CHECK(effective_beta(1.0, in_a, cfg, 1.0) == doctest::Approx(1.0));
  CHECK(effective_beta(0.0, in_a, cfg, 1.0) == doctest::Approx(0.0));
  CHECK(effective_beta(0.5, in_b, cfg, 2.0) == doctest::Approx(1.0));
  CHECK(effective_beta(0.7, outside, cfg, 1.0) == doctest::Approx(0.0));

  // beta_eff(alpha) + beta_eff(1-alpha) = beta_v inside either region
  for (double alpha : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    for (std::uint32_t v : {in_a, in_b}) {
      CHECK(effective_beta(alpha, v, cfg, 1.3) + effective_beta(1.0 - alpha, v, cfg, 1.3) ==
            doctest::Approx(cfg.m_fraction * 1.3));
    }
  }

  // exact cross-fade monotonicity of the injected amplitude
  double prev_a = -1.0, prev_b = 2.0;
  for (int i = 0; i <= 10; ++i) {
    const double alpha = 0.1 * i;
    const double ba = effective_beta(alpha, in_a, cfg, 1.0);
    const double bb = effective_beta(alpha, in_b, cfg, 1.0);
    CHECK(ba >= prev_a);
    CHECK(bb <= prev_b);
    prev_a = ba;
    prev_b = bb;
  }
}

TEST_CASE("generate_subject: standardization and trend invariants") {
  PhantomConfig cfg = default_phantom_config();
  cfg.seed = 3;
  Rng rng(derive_seed(cfg.seed, "subject", 0));
  const SubjectSeries subj = generate_subject(cfg, 0.0, rng);  // alpha=0: region A silent

  // with alpha = 0 region A carries no injected signal, so the series is the
  // standardized baseline: unit variance, zero per-run trend
  const std::uint32_t va = cfg.region_a.front();
  const double* y = subj.voxel(va);
  double mean = 0.0;
  for (int t = 0; t < subj.length; ++t) mean += y[t];
  mean /= subj.length;
  double ss = 0.0;
  for (int t = 0; t < subj.length; ++t) ss += (y[t] - mean) * (y[t] - mean);
  CHECK(ss / (subj.length - 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("generate_subject: injection is stimulus-locked and seed-stable") {
  PhantomConfig cfg = default_phantom_config();
  cfg.seed = 4;

  // alpha = 0: no stimulus-locked component in region A (white noise keeps
  // the null correlation spread tight; AR(1) widens it)
  {
    PhantomConfig white = cfg;
    white.noise = NoiseModel::White;
    Rng rng(derive_seed(white.seed, "subject", 0));
    const SubjectSeries subj = generate_subject(white, 0.0, rng);
    for (std::uint32_t v : white.region_a)
      CHECK(std::abs(pearson_with_reference(subj.voxel(v), subj.length)) < 0.2);
  }

  // alpha = 1, m = 1: signal m*x on unit-variance noise gives
  // r = m*sd(x)/sqrt(m^2 var(x) + 1) = 0.5/sqrt(1.25) ~= 0.447; the seed
  // median lands on it
  {
    std::vector<double> med_r;
    for (int seed = 0; seed < 100; ++seed) {
      PhantomConfig c2 = cfg;
      c2.seed = static_cast<std::uint64_t>(seed);
      Rng rng(derive_seed(c2.seed, "subject", 0));
      const SubjectSeries subj = generate_subject(c2, 1.0, rng);
      std::vector<double> rs;
      for (std::uint32_t v : c2.region_a)
        rs.push_back(pearson_with_reference(subj.voxel(v), subj.length));
      med_r.push_back(median_of(rs));
    }
    CHECK(median_of(med_r) == doctest::Approx(0.4472).epsilon(0.08));
    CHECK(median_of(med_r) > 0.4);
  }

  // identical seed and alpha give bitwise-identical output
  {
    Rng r1(derive_seed(cfg.seed, "subject", 2));
    Rng r2(derive_seed(cfg.seed, "subject", 2));
    const SubjectSeries a = generate_subject(cfg, 0.7, r1);
    const SubjectSeries b = generate_subject(cfg, 0.7, r2);
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("glm_zscores: null calibration, perfect fit, and amplitude linearity") {
  // pure-noise calibration on a 1000-voxel patch with no regions
  PhantomConfig noise_cfg;
  noise_cfg.nx = 40;
  noise_cfg.ny = 25;
  noise_cfg.region_a.clear();
  noise_cfg.region_b.clear();
  noise_cfg.noise = NoiseModel::White;
  noise_cfg.seed = 5;
  Rng rng(derive_seed(noise_cfg.seed, "subject", 0));
  const SubjectSeries subj = generate_subject(noise_cfg, 0.5, rng);
  const std::vector<float> z = glm_zscores(subj, noise_cfg);
  double zm = 0.0;
  for (float v : z) zm += v;
  zm /= static_cast<double>(z.size());
  double zss = 0.0;
  for (float v : z) zss += (v - zm) * (v - zm);
  const double zsd = std::sqrt(zss / (static_cast<double>(z.size()) - 1.0));
  CHECK(std::abs(zm) < 0.1);
  CHECK(zsd > 0.9);
  CHECK(zsd < 1.1);

  // series equal to the reference plus tiny noise: |z| huge
  {
    PhantomConfig tiny;
    tiny.nx = 1;
    tiny.ny = 1;
    tiny.region_a.clear();
    tiny.region_b.clear();
    SubjectSeries s;
    s.alpha = 0.0;
    s.n_voxels = 1;
    s.length = tiny.series_length();
    Rng r(6);
    for (int t = 0; t < s.length; ++t)
      s.data.push_back(reference_function(t) + 1e-3 * r.normal());
    CHECK(std::abs(glm_zscores(s, tiny)[0]) > 50.0);
  }

  // expected z at alpha=0.5 is about half of the alpha=1 expectation
  {
    PhantomConfig cfg = default_phantom_config();
    double sum_half = 0.0, sum_full = 0.0;
    for (int seed = 0; seed < 100; ++seed) {
      cfg.seed = static_cast<std::uint64_t>(seed);
      Rng rh(derive_seed(cfg.seed, "subject", 0));
      Rng rf(derive_seed(cfg.seed, "subject", 1));
      const std::vector<float> zh = glm_zscores(generate_subject(cfg, 0.5, rh), cfg);
      const std::vector<float> zf = glm_zscores(generate_subject(cfg, 1.0, rf), cfg);
      for (std::uint32_t v : cfg.region_a) {
        sum_half += zh[v];
        sum_full += zf[v];
      }
    }
    CHECK(sum_half / sum_full == doctest::Approx(0.5).epsilon(0.05));
  }
}

TEST_CASE("generate_population: shape, determinism, and validation") {
  PhantomConfig cfg = default_phantom_config();
  cfg.seed = 7;
  const VolumeDataset pop = generate_population(cfg);
  CHECK(pop.n_subjects() == 7);
  CHECK(pop.zvols.size() == 7);
  CHECK(pop.lattice.n_masked() == 12 * 24);

  PhantomConfig single = cfg;
  single.scores = {0.5};
  CHECK_THROWS_AS(generate_population(single), ValidationError);

  PhantomConfig other = cfg;
  other.seed = 8;
  const VolumeDataset pop2 = generate_population(other);
  bool any_diff = false;
  for (std::size_t v = 0; v < pop.zvols[0].size(); ++v)
    any_diff |= (pop.zvols[0][v] != pop2.zvols[0][v]);
  CHECK(any_diff);
  CHECK(ground_truth_labels(cfg) == ground_truth_labels(other));

  // same seed reproduces bitwise
  const VolumeDataset pop3 = generate_population(cfg);
  for (std::size_t i = 0; i < pop.zvols.size(); ++i)
    CHECK(std::memcmp(pop.zvols[i].data(), pop3.zvols[i].data(),
                      pop.zvols[i].size() * sizeof(float)) == 0);
}

TEST_CASE("phantom config validation") {
  PhantomConfig cfg = default_phantom_config();
  CHECK_NOTHROW(cfg.validate());

  PhantomConfig overlap = cfg;
  overlap.region_b = overlap.region_a;
  CHECK_THROWS_AS(overlap.validate(), ValidationError);

  PhantomConfig bad_period = cfg;
  bad_period.run_length = 50;
  CHECK_THROWS_AS(bad_period.validate(), ValidationError);

  PhantomConfig bad_scores = cfg;
  bad_scores.scores = {0.0, 1.2};
  CHECK_THROWS_AS(bad_scores.validate(), ValidationError);
}

TEST_CASE("z amplitude rises with alpha in region A and falls in region B") {
  PhantomConfig cfg = default_phantom_config();
  std::vector<double> mean_a, mean_b;
  for (double alpha : {0.0, 0.5, 1.0}) {
    std::vector<double> za, zb;
    for (int seed = 0; seed < 20; ++seed) {
      cfg.seed = static_cast<std::uint64_t>(1000 + seed);
      Rng rng(derive_seed(cfg.seed, "subject", 0));
      const std::vector<float> z = glm_zscores(generate_subject(cfg, alpha, rng), cfg);
      for (std::uint32_t v : cfg.region_a) za.push_back(z[v]);
      for (std::uint32_t v : cfg.region_b) zb.push_back(z[v]);
    }
    mean_a.push_back(mean_of(za));
    mean_b.push_back(mean_of(zb));
  }
  CHECK(mean_a[0] < mean_a[1]);
  CHECK(mean_a[1] < mean_a[2]);
  CHECK(mean_b[0] > mean_b[1]);
  CHECK(mean_b[1] > mean_b[2]);
}
