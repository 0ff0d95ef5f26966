#include "voxgp/volume.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace voxgp {

void VolumeDataset::validate() const {
  score_map.validate();
  if (scores.size() < 2) throw ValidationError("VolumeDataset: need at least 2 subjects");
  if (zvols.size() != scores.size())
    throw ValidationError("VolumeDataset: scores/volumes count mismatch");
  for (const auto& vol : zvols)
    if (vol.size() != lattice.n_total())
      throw ValidationError("VolumeDataset: volume does not conform to lattice dims");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("VolumeDataset: non-finite score");
    if (s < score_map.raw_min || s > score_map.raw_max)
      throw ValidationError("VolumeDataset: score outside declared raw range");
  }
  for (const auto& vol : zvols)
    for (std::uint32_t v : lattice.masked_ids())
      if (!std::isfinite(vol[v]))
        throw ValidationError("VolumeDataset: non-finite masked-in voxel value");
}

std::vector<double> VolumeDataset::voxel_targets(std::size_t voxel) const {
  std::vector<double> y(zvols.size());
  for (std::size_t i = 0; i < zvols.size(); ++i) y[i] = zvols[i][voxel];
  return y;
}

std::vector<double> transform_inputs(KernelKind kind, const VolumeDataset& dataset,
                                     double* input_center) {
  std::vector<double> xs(dataset.scores.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    xs[i] = dataset.score_map.normalize(dataset.scores[i]);
  double center = 0.0;
  if (kind == KernelKind::Linear) {
    center = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    for (double& x : xs) x -= center;
  }
  if (input_center) *input_center = center;
  return xs;
}

namespace {

std::vector<GpDataset> build_voxel_data(const VolumeDataset& dataset, KernelKind kind,
                                        double mean_value, double* input_center) {
  const std::vector<double> xs = transform_inputs(kind, dataset, input_center);
  std::vector<GpDataset> out;
  out.reserve(dataset.lattice.n_masked());
  for (std::uint32_t v : dataset.lattice.masked_ids()) {
    GpDataset d;
    d.inputs = xs;
    d.targets = dataset.voxel_targets(v);
    d.mean_value = mean_value;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

HyperField initialize_field(const VolumeDataset& dataset, KernelKind kind,
                            const VolumeFitOptions& opts, FitReport* report) {
  dataset.validate();
  double center = 0.0;
  const std::vector<GpDataset> voxel_data =
      build_voxel_data(dataset, kind, opts.mean_value, &center);

  HyperField field(dataset.lattice, HyperParams{});
  FitReport rep;
  rep.n_voxels = voxel_data.size();
  rep.voxel_lml.resize(voxel_data.size());
  rep.voxel_status.resize(voxel_data.size());
  const HyperParams start{};  // l = 0 after normalization
  for (std::size_t i = 0; i < voxel_data.size(); ++i) {
    VoxelFit fit = fit_voxel(kind, voxel_data[i], start, opts.optimizer);
    rep.voxel_status[i] = fit.status;
    if (fit.status == FitStatus::DegenerateData) ++rep.n_degenerate;
    if (fit.status == FitStatus::Stalled) ++rep.n_stalled;
    field.values()[i] = fit.params;
    rep.voxel_lml[i] = fit.lml;
    rep.total_lml_init += fit.lml;
  }
  rep.total_lml_final = rep.total_lml_init;
  if (report) *report = rep;
  return field;
}

FittedVolumeModel fit_volume(const VolumeDataset& dataset, KernelKind kind,
                             const CarConfig& cfg, const VolumeFitOptions& opts) {
  dataset.validate();
  cfg.validate();

  FittedVolumeModel model;
  model.kind = kind;
  model.cfg = cfg;
  model.score_map = dataset.score_map;
  model.mean_value = opts.mean_value;
  model.opts = opts.optimizer;
  model.voxel_data = build_voxel_data(dataset, kind, opts.mean_value, &model.input_center);

  HyperField init = initialize_field(dataset, kind, opts, &model.report);
  model.report.car_asymmetric_pairs = dataset.lattice.degree_asymmetric_pairs();
  model.field = cfg.sweeps > 0
                    ? run_icm(model.voxel_data, kind, cfg, init, opts.optimizer,
                              &model.report.icm)
                    : std::move(init);

  model.report.total_lml_final = 0.0;
  for (std::size_t i = 0; i < model.voxel_data.size(); ++i) {
    const double lml = log_marginal_likelihood(kind, model.field.values()[i],
                                               model.voxel_data[i], opts.optimizer.jitter);
    model.report.voxel_lml[i] = lml;
    model.report.total_lml_final += lml;
  }
  return model;
}

PredictionVolume predict_volume(const FittedVolumeModel& model, double x_star_raw,
                                bool include_noise) {
  const Lattice& lat = model.field.lattice();
  PredictionVolume out;
  out.query_score = x_star_raw;
  out.extrapolated =
      x_star_raw < model.score_map.raw_min || x_star_raw > model.score_map.raw_max;
  const double x_star = model.score_map.normalize(x_star_raw) - model.input_center;

  const float nan = std::numeric_limits<float>::quiet_NaN();
  out.mean_vol.assign(lat.n_total(), nan);
  out.var_vol.assign(lat.n_total(), nan);
  for (std::size_t i = 0; i < lat.n_masked(); ++i) {
    const std::uint32_t v = lat.masked_ids()[i];
    const PredictiveGaussian p =
        predict(model.kind, model.field.values()[i], model.voxel_data[i], x_star,
                include_noise, model.opts.jitter);
    out.mean_vol[v] = static_cast<float>(p.mean);
    out.var_vol[v] = static_cast<float>(p.variance);
  }
  return out;
}

double total_evidence(const FittedVolumeModel& model) {
  double total = 0.0;
  for (double lml : model.report.voxel_lml) total += lml;
  return total;
}

ModelComparisonMap compare_models(const FittedVolumeModel& model_a,
                                  const FittedVolumeModel& model_b,
                                  double prior_odds_a_over_b) {
  const Lattice& lat = model_a.field.lattice();
  if (!(lat == model_b.field.lattice()))
    throw MaskMismatch("compare_models: models do not share a mask");

  ModelComparisonMap out;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  out.log_bf_vol.assign(lat.n_total(), nan);
  out.p_linear_vol.assign(lat.n_total(), nan);
  for (std::size_t i = 0; i < lat.n_masked(); ++i) {
    const std::uint32_t v = lat.masked_ids()[i];
    const double log_bf = model_a.report.voxel_lml[i] - model_b.report.voxel_lml[i];
    out.log_bf_vol[v] = static_cast<float>(log_bf);
    out.p_linear_vol[v] =
        static_cast<float>(1.0 / (1.0 + prior_odds_a_over_b * std::exp(log_bf)));
  }
  out.total_a = total_evidence(model_a);
  out.total_b = total_evidence(model_b);
  out.per_voxel_mean_log_diff =
      (out.total_a - out.total_b) / static_cast<double>(lat.n_masked());
  return out;
}

}  // namespace voxgp
