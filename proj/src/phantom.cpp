#include "voxgp/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxgp {

void PhantomConfig::validate() const {
  if (nx <= 0 || ny <= 0 || nz <= 0) throw ValidationError("PhantomConfig: bad dims");
  if (n_runs <= 0) throw ValidationError("PhantomConfig: n_runs must be positive");
  if (run_length <= 0 || run_length % 48 != 0)
    throw ValidationError("PhantomConfig: run_length must be a positive multiple of 48");
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0))
      throw ValidationError("PhantomConfig: scores must lie in [0,1]");
  if (!(m_fraction > 0.0)) throw ValidationError("PhantomConfig: m_fraction must be positive");
  if (noise == NoiseModel::Ar1 && !(std::abs(ar1_phi) < 1.0))
    throw ValidationError("PhantomConfig: |ar1_phi| < 1 required");
  const std::size_t n = n_voxels();
  std::vector<std::uint8_t> seen(n, 0);
  for (const auto* region : {&region_a, &region_b}) {
    for (std::uint32_t v : *region) {
      if (v >= n) throw ValidationError("PhantomConfig: region voxel outside volume");
      if (seen[v]++) throw ValidationError("PhantomConfig: regions must be disjoint");
    }
  }
}

PhantomConfig default_phantom_config() {
  PhantomConfig cfg;
  const auto rect = [&](int x0, int x1, int y0, int y1) {
    std::vector<std::uint32_t> ids;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        ids.push_back(static_cast<std::uint32_t>(x + cfg.nx * y));
    return ids;
  };
  // Two 8x10 blocks separated by a 2-row band, together covering a bit over
  // half the patch; region statistics then dominate background noise in
  // population-level contrasts.
  cfg.region_a = rect(0, 8, 1, 11);
  cfg.region_b = rect(4, 12, 13, 23);
  return cfg;
}

int reference_function(int t) {
  const int phase = t % 48;
  return (phase >= 12 && phase < 36) ? 1 : 0;
}

std::vector<double> detrend_run(std::span<const double> series) {
  const auto n = series.size();
  if (n < 3) throw ValidationError("detrend_run: need at least 3 samples");
  // OLS of y on [1, t] in closed form.
  const double nn = static_cast<double>(n);
  const double t_mean = 0.5 * (nn - 1.0);
  double y_mean = 0.0;
  for (double y : series) y_mean += y;
  y_mean /= nn;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(i) - t_mean;
    sxy += dt * (series[i] - y_mean);
    sxx += dt * dt;
  }
  const double slope = sxy / sxx;
  const double intercept = y_mean - slope * t_mean;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = series[i] - (intercept + slope * static_cast<double>(i));
  return out;
}

namespace {

double sample_variance(std::span<const double> s) {
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  return ss / (n - 1.0);
}

}  // namespace

std::vector<double> standardize(std::span<const double> series) {
  if (series.size() < 2) throw ValidationError("standardize: need at least 2 samples");
  const double var = sample_variance(series);
  if (!(var > 0.0)) throw ZeroVariance("standardize: zero sample variance");
  const double inv_sd = 1.0 / std::sqrt(var);
  std::vector<double> out(series.begin(), series.end());
  for (double& v : out) v *= inv_sd;
  return out;
}

namespace {

bool in_region(const std::vector<std::uint32_t>& region, std::uint32_t v) {
  return std::find(region.begin(), region.end(), v) != region.end();
}

// Score-dependent injection weight for a voxel; amplitude is weight * m * sigma_v.
double signal_weight(const PhantomConfig& cfg, double alpha, std::uint32_t v) {
  const bool a = in_region(cfg.region_a, v);
  const bool b = in_region(cfg.region_b, v);
  if (!a && !b) return 0.0;
  switch (cfg.profile) {
    case SignalProfile::CrossFade:
      return a ? alpha : (1.0 - alpha);
    case SignalProfile::LinearRamp: {
      const double mean_score =
          std::accumulate(cfg.scores.begin(), cfg.scores.end(), 0.0) /
          static_cast<double>(cfg.scores.size());
      // same slope as the cross-fade injection, zero-centered at the score mean
      const double ramp = alpha - mean_score;
      return a ? ramp : -ramp;
    }
  }
  return 0.0;
}

}  // namespace

double effective_beta(double alpha, std::uint32_t voxel, const PhantomConfig& cfg,
                      double sigma_v) {
  const double beta_v = cfg.m_fraction * sigma_v;
  const double da = in_region(cfg.region_a, voxel) ? 1.0 : 0.0;
  const double db = in_region(cfg.region_b, voxel) ? 1.0 : 0.0;
  return alpha * da * beta_v + (1.0 - alpha) * db * beta_v;
}

SubjectSeries generate_subject(const PhantomConfig& cfg, double alpha, Rng& rng) {
  cfg.validate();
  const std::size_t nv = cfg.n_voxels();
  const int T = cfg.series_length();

  SubjectSeries subj;
  subj.alpha = alpha;
  subj.n_voxels = nv;
  subj.length = T;
  subj.data.resize(nv * static_cast<std::size_t>(T));

  std::vector<double> run(static_cast<std::size_t>(cfg.run_length));
  for (std::size_t v = 0; v < nv; ++v) {
    double* series = subj.voxel(v);
    // Baseline noise, one run at a time (AR(1) restarts at each run with a
    // stationary draw), then per-run detrending.
    for (int r = 0; r < cfg.n_runs; ++r) {
      if (cfg.noise == NoiseModel::White) {
        for (double& x : run) x = rng.normal();
      } else {
        const double phi = cfg.ar1_phi;
        double prev = rng.normal() / std::sqrt(1.0 - phi * phi);
        for (double& x : run) {
          x = prev;
          prev = phi * prev + rng.normal();
        }
      }
      const std::vector<double> resid = detrend_run(run);
      std::copy(resid.begin(), resid.end(), series + r * cfg.run_length);
    }
    const std::vector<double> standardized =
        standardize(std::span<const double>(series, static_cast<std::size_t>(T)));
    const double sigma_v = std::sqrt(sample_variance(standardized));
    const double amplitude =
        signal_weight(cfg, alpha, static_cast<std::uint32_t>(v)) * cfg.m_fraction * sigma_v;
    for (int t = 0; t < T; ++t)
      series[t] = standardized[static_cast<std::size_t>(t)] +
                  amplitude * reference_function(t);
  }
  return subj;
}

std::vector<float> glm_zscores(const SubjectSeries& subject,
                               [[maybe_unused]] const PhantomConfig& cfg) {
  const int T = subject.length;
  const double nn = static_cast<double>(T);
  double x_mean = 0.0;
  for (int t = 0; t < T; ++t) x_mean += reference_function(t);
  x_mean /= nn;
  double sxx = 0.0;
  for (int t = 0; t < T; ++t) {
    const double dx = reference_function(t) - x_mean;
    sxx += dx * dx;
  }

  std::vector<float> z(subject.n_voxels);
  for (std::size_t v = 0; v < subject.n_voxels; ++v) {
    const double* y = subject.voxel(v);
    double y_mean = 0.0;
    for (int t = 0; t < T; ++t) y_mean += y[t];
    y_mean /= nn;
    double sxy = 0.0;
    for (int t = 0; t < T; ++t)
      sxy += (reference_function(t) - x_mean) * (y[t] - y_mean);
    const double beta = sxy / sxx;
    const double intercept = y_mean - beta * x_mean;
    double rss = 0.0;
    for (int t = 0; t < T; ++t) {
      const double r = y[t] - intercept - beta * reference_function(t);
      rss += r * r;
    }
    const double se = std::sqrt(rss / (nn - 2.0) / sxx);
    z[v] = static_cast<float>(beta / se);
  }
  return z;
}

VolumeDataset generate_population(const PhantomConfig& cfg) {
  cfg.validate();
  VolumeDataset out{Lattice::full(cfg.nx, cfg.ny, cfg.nz), cfg.scores, {}, ScoreMap{0.0, 1.0}};
  out.zvols.reserve(cfg.scores.size());
  for (std::size_t i = 0; i < cfg.scores.size(); ++i) {
    Rng rng(derive_seed(cfg.seed, "subject", i));
    const SubjectSeries subj = generate_subject(cfg, cfg.scores[i], rng);
    out.zvols.push_back(glm_zscores(subj, cfg));
  }
  out.validate();
  return out;
}

std::vector<float> ground_truth_labels(const PhantomConfig& cfg) {
  std::vector<float> labels(cfg.n_voxels(), 0.0f);
  for (std::uint32_t v : cfg.region_a) labels[v] = 1.0f;
  for (std::uint32_t v : cfg.region_b) labels[v] = 2.0f;
  return labels;
}

}  // namespace voxgp
