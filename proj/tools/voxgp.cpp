// voxgp: voxel-wise Gaussian-process regression of image phenotypes against
// behavioural scores, with CAR-regularized hyperparameter fields.
//
// Exit codes: 0 success, 2 usage, 3 I/O, 4 format/validation.
// Diagnostics go to stderr; machine-readable key=value summaries to stdout.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "voxgp/evaluation.hpp"
#include "voxgp/io.hpp"
#include "voxgp/phantom.hpp"

namespace fs = std::filesystem;
using namespace voxgp;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitFormat = 4;

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    if (item.empty()) throw CLI::ValidationError("empty entry in list: " + text);
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw CLI::ValidationError("bad number in list: " + item);
    }
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    out.push_back(text.substr(pos, comma - pos));
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  return out;
}

VolumeDataset load_dataset(const fs::path& data_path, const fs::path& scores_path,
                           const RunConfig& cfg) {
  const VolumeFileData file = read_gpv1(data_path);
  const std::vector<double> scores = read_scores_csv(scores_path);
  if (scores.size() != file.count)
    throw ValidationError("scores CSV row count does not match data volume count");
  VolumeDataset dataset{lattice_from_file(file), scores, file.volumes, cfg.score_map()};
  dataset.validate();
  return dataset;
}

void write_fit_report_csv(const fs::path& path, const Lattice& lat, const FitReport& rep) {
  std::string text = "voxel_index,lml,status\n";
  for (std::size_t i = 0; i < lat.n_masked(); ++i) {
    const char* status = "ok";
    if (rep.voxel_status[i] == FitStatus::DegenerateData) status = "degenerate";
    else if (rep.voxel_status[i] == FitStatus::Stalled) status = "stalled";
    text += std::to_string(lat.masked_ids()[i]) + "," + format_double(rep.voxel_lml[i]) +
            "," + status + "\n";
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

int cmd_simulate(const std::string& out_data, const std::string& out_scores,
                 const std::string& out_truth, std::uint64_t seed,
                 const std::string& scores_text, const std::string& noise,
                 double phi, double m, const std::string& profile) {
  PhantomConfig cfg = default_phantom_config();
  cfg.seed = seed;
  if (!scores_text.empty()) cfg.scores = parse_double_list(scores_text);
  if (noise == "white") cfg.noise = NoiseModel::White;
  else if (noise == "ar1") cfg.noise = NoiseModel::Ar1;
  else throw CLI::ValidationError("--noise must be white or ar1");
  cfg.ar1_phi = phi;
  cfg.m_fraction = m;
  if (profile == "crossfade") cfg.profile = SignalProfile::CrossFade;
  else if (profile == "linear") cfg.profile = SignalProfile::LinearRamp;
  else throw CLI::ValidationError("--profile must be crossfade or linear");

  const VolumeDataset dataset = generate_population(cfg);
  write_gpv1(out_data, dataset.lattice, dataset.zvols);
  write_scores_csv(out_scores, dataset.scores);
  if (!out_truth.empty())
    write_gpv1(out_truth, dataset.lattice, {ground_truth_labels(cfg)});
  std::cout << "subjects=" << dataset.n_subjects() << "\n";
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& scores_path,
            const std::string& config_path, const std::string& out_path,
            const std::string& report_path) {
  const RunConfig cfg =
      config_path.empty() ? RunConfig{} : read_run_config(config_path);
  const VolumeDataset dataset = load_dataset(data_path, scores_path, cfg);
  const FittedVolumeModel model =
      fit_volume(dataset, cfg.kernel, cfg.car_config(), cfg.fit_options());
  if (model.report.car_asymmetric_pairs > 0)
    std::cerr << "warning: " << model.report.car_asymmetric_pairs
              << " neighbour pairs with unequal degree break exact CAR symmetry\n";
  write_gph1(out_path, model.field);
  if (!report_path.empty())
    write_fit_report_csv(report_path, dataset.lattice, model.report);
  std::cout << "total_evidence=" << format_double(total_evidence(model)) << "\n";
  return 0;
}

int cmd_predict(const std::string& field_path, const std::string& data_path,
                const std::string& scores_path, const std::string& config_path,
                const std::string& at_text, const std::string& out_prefix,
                bool data_space) {
  const RunConfig cfg =
      config_path.empty() ? RunConfig{} : read_run_config(config_path);
  const VolumeDataset dataset = load_dataset(data_path, scores_path, cfg);
  HyperField field = read_gph1(field_path);
  if (!(field.lattice() == dataset.lattice))
    throw MaskMismatch("field and data lattices do not match");

  FittedVolumeModel model;
  model.kind = cfg.kernel;
  model.cfg = cfg.car_config();
  model.score_map = dataset.score_map;
  model.mean_value = cfg.mean;
  model.opts = cfg.fit_options().optimizer;
  model.voxel_data.reserve(dataset.lattice.n_masked());
  {
    const std::vector<double> xs =
        transform_inputs(cfg.kernel, dataset, &model.input_center);
    for (std::uint32_t v : dataset.lattice.masked_ids()) {
      GpDataset d;
      d.inputs = xs;
      d.targets = dataset.voxel_targets(v);
      d.mean_value = cfg.mean;
      model.voxel_data.push_back(std::move(d));
    }
  }
  model.field = std::move(field);

  for (const std::string& token : split_tokens(at_text)) {
    if (token.empty()) throw CLI::ValidationError("empty query in --at");
    double x = 0.0;
    try {
      x = std::stod(token);
    } catch (const std::exception&) {
      throw CLI::ValidationError("bad query score: " + token);
    }
    const PredictionVolume pred = predict_volume(model, x, data_space);
    if (pred.extrapolated)
      std::cerr << "warning: extrapolation at " << token << "\n";
    write_gpv1(out_prefix + "_mean_" + token + ".gpv", dataset.lattice, {pred.mean_vol});
    write_gpv1(out_prefix + "_var_" + token + ".gpv", dataset.lattice, {pred.var_vol});
  }
  return 0;
}

KernelKind parse_kernel_name(const std::string& name) {
  if (name == "se") return KernelKind::SquaredExponential;
  if (name == "linear") return KernelKind::Linear;
  throw CLI::ValidationError("kernel must be se or linear: " + name);
}

int cmd_compare(const std::string& data_path, const std::string& scores_path,
                const std::string& config_path, const std::string& out_prefix,
                const std::string& kernel_a, const std::string& kernel_b) {
  const RunConfig cfg =
      config_path.empty() ? RunConfig{} : read_run_config(config_path);
  const VolumeDataset dataset = load_dataset(data_path, scores_path, cfg);
  // Both models share the CAR config and seed so differences isolate the kernel.
  const FittedVolumeModel model_a =
      fit_volume(dataset, parse_kernel_name(kernel_a), cfg.car_config(), cfg.fit_options());
  const FittedVolumeModel model_b =
      fit_volume(dataset, parse_kernel_name(kernel_b), cfg.car_config(), cfg.fit_options());
  const ModelComparisonMap map = compare_models(model_a, model_b);
  write_gpv1(out_prefix + "_logbf.gpv", dataset.lattice, {map.log_bf_vol});
  write_gpv1(out_prefix + "_plinear.gpv", dataset.lattice, {map.p_linear_vol});
  std::cout << "total_se=" << format_double(map.total_a)
            << " total_linear=" << format_double(map.total_b)
            << " per_voxel_log_diff=" << format_double(map.per_voxel_mean_log_diff)
            << "\n";
  return 0;
}

int cmd_crossval(const std::string& data_path, const std::string& scores_path,
                 const std::string& config_path, const std::string& bins_text,
                 const std::string& out_path, const std::string& profile_path) {
  const RunConfig cfg =
      config_path.empty() ? RunConfig{} : read_run_config(config_path);
  const VolumeDataset dataset = load_dataset(data_path, scores_path, cfg);

  std::optional<BinningRule> rule;
  if (!bins_text.empty()) {
    rule = parse_binning_rule(bins_text);
    if (!rule->equidistant_representatives())
      std::cerr << "warning: binning representatives are not equidistant\n";
    // Surface coverage problems as a usage error before running any folds.
    apply_binning(dataset.scores, *rule);
  }

  const CvReport cont =
      loo_cv(dataset, cfg.kernel, cfg.car_config(), std::nullopt, cfg.fit_options());
  std::optional<CvReport> binned;
  if (rule)
    binned = loo_cv(dataset, cfg.kernel, cfg.car_config(), rule, cfg.fit_options());

  std::string text = "subject,score,representative,distance,pred_logdensity,model\n";
  const auto append_report = [&text](const CvReport& rep) {
    for (const CvEntry& e : rep.entries) {
      text += std::to_string(e.subject) + "," + format_double(e.score) + "," +
              format_double(e.representative) + "," + format_double(e.distance) + "," +
              (e.failed ? "failed" : format_double(e.pred_logdensity)) + "," +
              rep.model_label + "\n";
    }
    text += "overall,,,," + format_double(rep.overall_mean) + "," + rep.model_label + "\n";
  };
  append_report(cont);
  if (binned) append_report(*binned);
  {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    out << text;
    if (!out) throw IoError("write failed: " + out_path);
  }

  std::cout << "loo_mean_continuous=" << format_double(cont.overall_mean) << "\n";
  if (binned) {
    std::cout << "loo_mean_binned=" << format_double(binned->overall_mean) << "\n";
    const std::vector<DistanceBucket> profile = distance_profile(cont, *binned);
    if (!profile_path.empty()) {
      std::string ptext = "distance,n,mean_continuous,mean_binned\n";
      for (const DistanceBucket& b : profile)
        ptext += format_double(b.distance) + "," + std::to_string(b.n) + "," +
                 format_double(b.mean_continuous) + "," + format_double(b.mean_binned) +
                 "\n";
      std::ofstream out(profile_path, std::ios::trunc);
      if (!out) throw IoError("cannot open for writing: " + profile_path);
      out << ptext;
      if (!out) throw IoError("write failed: " + profile_path);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxel-wise GP regression with CAR-regularized hyperparameter fields"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic phantom dataset");
  std::string sim_data, sim_scores, sim_truth, sim_scores_list, sim_noise = "ar1",
              sim_profile = "crossfade";
  std::uint64_t sim_seed = 0;
  double sim_phi = 0.3, sim_m = 1.0;
  sim->add_option("--out-data", sim_data, "output GPV1 dataset")->required();
  sim->add_option("--out-scores", sim_scores, "output scores CSV")->required();
  sim->add_option("--out-truth", sim_truth, "output ground-truth region labels (GPV1)");
  sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("--scores", sim_scores_list, "comma-separated subject scores in [0,1]");
  sim->add_option("--noise", sim_noise, "baseline noise model: white|ar1");
  sim->add_option("--phi", sim_phi, "AR(1) coefficient");
  sim->add_option("--m", sim_m, "signal fraction of baseline sd");
  sim->add_option("--profile", sim_profile, "signal profile: crossfade|linear");

  // fit
  auto* fit = app.add_subcommand("fit", "fit the spatially regularized GP volume model");
  std::string fit_data, fit_scores, fit_config, fit_out, fit_report;
  fit->add_option("--data", fit_data, "GPV1 dataset")->required();
  fit->add_option("--scores", fit_scores, "scores CSV")->required();
  fit->add_option("--config", fit_config, "run configuration (key=value)");
  fit->add_option("--out", fit_out, "output GPH1 field")->required();
  fit->add_option("--report", fit_report, "fit report CSV");

  // predict
  auto* pre = app.add_subcommand("predict", "predict mean/variance volumes at query scores");
  std::string pre_field, pre_data, pre_scores, pre_config, pre_at, pre_prefix;
  bool pre_data_space = false;
  pre->add_option("--field", pre_field, "GPH1 field")->required();
  pre->add_option("--data", pre_data, "GPV1 dataset")->required();
  pre->add_option("--scores", pre_scores, "scores CSV")->required();
  pre->add_option("--config", pre_config, "run configuration");
  pre->add_option("--at", pre_at, "comma-separated query scores")->required();
  pre->add_option("--out-prefix", pre_prefix, "output path prefix")->required();
  pre->add_flag("--data-space", pre_data_space, "add observation noise to the variance");

  // compare
  auto* cmp = app.add_subcommand("compare", "compare two kernel models per voxel");
  std::string cmp_data, cmp_scores, cmp_config, cmp_out, cmp_ka = "se", cmp_kb = "linear";
  cmp->add_option("--data", cmp_data, "GPV1 dataset")->required();
  cmp->add_option("--scores", cmp_scores, "scores CSV")->required();
  cmp->add_option("--config", cmp_config, "run configuration");
  cmp->add_option("--out", cmp_out, "output path prefix")->required();
  cmp->add_option("--kernel-a", cmp_ka, "first kernel: se|linear");
  cmp->add_option("--kernel-b", cmp_kb, "second kernel: se|linear");

  // crossval
  auto* cv = app.add_subcommand("crossval", "leave-one-out cross-validation");
  std::string cv_data, cv_scores, cv_config, cv_bins, cv_out, cv_profile;
  cv->add_option("--data", cv_data, "GPV1 dataset")->required();
  cv->add_option("--scores", cv_scores, "scores CSV")->required();
  cv->add_option("--config", cv_config, "run configuration");
  cv->add_option("--bins", cv_bins, "binning rule, e.g. 26:24,29:27,30:30");
  cv->add_option("--out", cv_out, "report CSV")->required();
  cv->add_option("--out-profile", cv_profile, "distance-profile CSV (with --bins)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_data, sim_scores, sim_truth, sim_seed, sim_scores_list,
                          sim_noise, sim_phi, sim_m, sim_profile);
    if (fit->parsed())
      return cmd_fit(fit_data, fit_scores, fit_config, fit_out, fit_report);
    if (pre->parsed())
      return cmd_predict(pre_field, pre_data, pre_scores, pre_config, pre_at, pre_prefix,
                         pre_data_space);
    if (cmp->parsed())
      return cmd_compare(cmp_data, cmp_scores, cmp_config, cmp_out, cmp_ka, cmp_kb);
    if (cv->parsed())
      return cmd_crossval(cv_data, cv_scores, cv_config, cv_bins, cv_out, cv_profile);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UncoveredScore& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const MaskMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
