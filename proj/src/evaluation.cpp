#include "voxgp/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>

#include "voxgp/rng.hpp"

namespace voxgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void BinningRule::validate() const {
  if (segments.empty()) throw ValidationError("BinningRule: no segments");
  for (std::size_t i = 0; i + 1 < segments.size(); ++i)
    if (!(segments[i].upper_bound < segments[i + 1].upper_bound))
      throw ValidationError("BinningRule: bounds must be strictly increasing");
  for (const Segment& s : segments)
    if (!std::isfinite(s.upper_bound) || !std::isfinite(s.representative))
      throw ValidationError("BinningRule: non-finite segment");
}

bool BinningRule::equidistant_representatives() const {
  if (segments.size() < 3) return true;
  const double step = segments[1].representative - segments[0].representative;
  for (std::size_t i = 1; i + 1 < segments.size(); ++i) {
    const double d = segments[i + 1].representative - segments[i].representative;
    if (std::abs(d - step) > 1e-9 * std::max(1.0, std::abs(step))) return false;
  }
  return true;
}

double BinningRule::apply(double score) const {
  for (const Segment& s : segments)
    if (score <= s.upper_bound) return s.representative;
  if (passthrough_above) return score;
  throw UncoveredScore("score " + std::to_string(score) + " not covered by binning rule");
}

BinningRule mmse_default_rule() {
  return BinningRule{{{26.0, 24.0}, {29.0, 27.0}, {30.0, 30.0}}, false};
}

BinningRule parse_binning_rule(const std::string& text) {
  BinningRule rule;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item(text.data() + pos, comma - pos);
    const std::size_t colon = item.find(':');
    if (item.empty() || colon == std::string_view::npos)
      throw ValidationError("binning rule: expected upper:representative pairs");
    BinningRule::Segment seg{};
    const auto parse = [](std::string_view sv, double& out) {
      const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), out);
      if (res.ec != std::errc{} || res.ptr != sv.data() + sv.size())
        throw ValidationError("binning rule: bad number");
    };
    parse(item.substr(0, colon), seg.upper_bound);
    parse(item.substr(colon + 1), seg.representative);
    rule.segments.push_back(seg);
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  rule.validate();
  return rule;
}

std::vector<double> apply_binning(const std::vector<double>& scores, const BinningRule& rule) {
  rule.validate();
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = rule.apply(scores[i]);
  return out;
}

CvReport loo_cv(const VolumeDataset& dataset, KernelKind kind, const CarConfig& cfg,
                const std::optional<BinningRule>& binning, const VolumeFitOptions& opts,
                std::string model_label) {
  dataset.validate();
  const std::size_t n = dataset.n_subjects();
  if (n < 3) throw ValidationError("loo_cv: need at least 3 subjects");

  std::vector<double> train_scores = dataset.scores;
  if (binning) train_scores = apply_binning(dataset.scores, *binning);

  CvReport report;
  report.model_label =
      model_label.empty() ? (binning ? "binned" : "continuous") : std::move(model_label);

  const Lattice& lat = dataset.lattice;
  double sum = 0.0;
  std::size_t n_ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    CvEntry entry;
    entry.subject = static_cast<int>(i);
    entry.score = dataset.scores[i];
    entry.representative = train_scores[i];
    entry.distance = std::abs(entry.score - entry.representative);
    try {
      VolumeDataset fold{lat, {}, {}, dataset.score_map};
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        fold.scores.push_back(train_scores[j]);
        fold.zvols.push_back(dataset.zvols[j]);
      }
      CarConfig fold_cfg = cfg;
      fold_cfg.seed = derive_seed(cfg.seed, "fold", i);
      const FittedVolumeModel model = fit_volume(fold, kind, fold_cfg, opts);
      // The discretised (binned) model only knows the held-out subject's
      // stage, so it predicts at the representative; the continuous model
      // predicts at the raw score.
      const double query = binning ? entry.representative : entry.score;
      const PredictionVolume pred = predict_volume(model, query, /*include_noise=*/true);

      double acc = 0.0;
      for (std::uint32_t v : lat.masked_ids()) {
        const double var = pred.var_vol[v];
        const double d = dataset.zvols[i][v] - pred.mean_vol[v];
        acc += -0.5 * kLog2Pi - 0.5 * std::log(var) - 0.5 * d * d / var;
      }
      entry.pred_logdensity = acc / static_cast<double>(lat.n_masked());
      sum += entry.pred_logdensity;
      ++n_ok;
    } catch (const std::exception&) {
      entry.failed = true;
      entry.pred_logdensity = std::numeric_limits<double>::quiet_NaN();
    }
    report.entries.push_back(entry);
  }
  report.overall_mean = n_ok ? sum / static_cast<double>(n_ok)
                             : std::numeric_limits<double>::quiet_NaN();
  return report;
}

std::vector<DistanceBucket> distance_profile(const CvReport& report_cont,
                                             const CvReport& report_binned) {
  if (report_cont.entries.size() != report_binned.entries.size() ||
      report_cont.entries.empty())
    throw SubjectMismatch("distance_profile: reports cover different subjects");
  for (std::size_t i = 0; i < report_cont.entries.size(); ++i)
    if (report_cont.entries[i].subject != report_binned.entries[i].subject)
      throw SubjectMismatch("distance_profile: reports cover different subjects");

  std::map<double, DistanceBucket> buckets;
  for (std::size_t i = 0; i < report_binned.entries.size(); ++i) {
    const CvEntry& b = report_binned.entries[i];
    const CvEntry& c = report_cont.entries[i];
    if (b.failed || c.failed) continue;
    // quantize the key: equal distances can differ in the last ulp
    const double key = std::round(b.distance * 1e9) / 1e9;
    DistanceBucket& bucket = buckets[key];
    bucket.distance = key;
    bucket.mean_continuous += c.pred_logdensity;
    bucket.mean_binned += b.pred_logdensity;
    ++bucket.n;
  }
  std::vector<DistanceBucket> out;
  out.reserve(buckets.size());
  for (auto& [d, bucket] : buckets) {
    bucket.mean_continuous /= bucket.n;
    bucket.mean_binned /= bucket.n;
    out.push_back(bucket);
  }
  return out;
}

}  // namespace voxgp
