#include "bnsl/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "bnsl/errors.hpp"
#include "bnsl/json_io.hpp"
#include "bnsl/metrics.hpp"

namespace bnsl {

std::vector<SeriesPoint> generate_noiseless(const BnslParams& truth,
                                            std::span<const double> xs) {
  validate(truth);
  std::vector<double> grid(xs.begin(), xs.end());
  std::sort(grid.begin(), grid.end());
  std::vector<SeriesPoint> pts;
  pts.reserve(grid.size());
  for (double x : grid) pts.push_back({x, eval_bnsl(truth, x), Split::train});
  return pts;
}

namespace {

std::vector<double> probe_grid(const TestRange& range) {
  if (range.count < 1 || !(range.x_low > 0.0) || !(range.x_high >= range.x_low))
    throw DataError("sweep: bad test range");
  std::vector<double> xs(static_cast<std::size_t>(range.count));
  if (range.count == 1) {
    xs[0] = range.x_low;
    return xs;
  }
  const double llo = std::log(range.x_low);
  const double lhi = std::log(range.x_high);
  for (int i = 0; i < range.count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(range.count - 1);
    xs[static_cast<std::size_t>(i)] = std::exp(llo + t * (lhi - llo));
  }
  xs.back() = range.x_high;
  return xs;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, const FitConfig& cfg) {
  if (spec.x_grid.empty()) throw DataError("sweep: empty evaluation grid");
  if (spec.fit_max_candidates.empty()) throw DataError("sweep: no thresholds");

  std::vector<double> thresholds = spec.fit_max_candidates;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  const std::vector<double> probes = probe_grid(spec.test_range);
  if (probes.front() <= thresholds.back())
    throw DataError("sweep: test probes must lie above every fit cutoff");

  const int breaks = spec.truth.break_count();
  const int need = param_count(FormKind::bnsl, breaks);
  const std::vector<SeriesPoint> pts = generate_noiseless(spec.truth, spec.x_grid);

  std::vector<PredictionPair> pairs(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i)
    pairs[i].y = eval_bnsl(spec.truth, probes[i]);

  SweepResult result;
  for (const double t : thresholds) {
    ThresholdResult r;
    r.threshold = t;
    std::vector<SeriesPoint> train;
    for (const auto& p : pts)
      if (p.x <= t) train.push_back(p);
    r.fit_points = static_cast<int>(train.size());
    if (r.fit_points < need) {
      r.error = "insufficient data: " + std::to_string(train.size()) +
                " points below threshold, need " + std::to_string(need);
    } else {
      try {
        const FitResult res = fit(train, FormKind::bnsl, breaks, cfg);
        r.form = res.form;
        bool valid = true;
        for (std::size_t i = 0; i < probes.size(); ++i) {
          const double pred = r.form(probes[i]);
          if (!(pred > 0.0) || !std::isfinite(pred)) {
            valid = false;
            break;
          }
          pairs[i].yhat = pred;
        }
        if (valid) {
          r.rmsle = rmsle(pairs);
          r.ok = true;
          r.success = r.rmsle <= spec.success_rmsle;
        } else {
          r.error = "fitted curve leaves the positive range on the probe grid";
        }
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
    if (r.success && !result.minimal_successful_t)
      result.minimal_successful_t = t;
    result.per_threshold.push_back(std::move(r));
  }
  return result;
}

SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
  SweepSpec spec;
  j.at("truth").get_to(spec.truth);
  j.at("xGrid").get_to(spec.x_grid);
  j.at("fitMaxCandidates").get_to(spec.fit_max_candidates);
  const nlohmann::json& tr = j.at("testRange");
  spec.test_range.x_low = tr.at("xLow").get<double>();
  spec.test_range.x_high = tr.at("xHigh").get<double>();
  spec.test_range.count = tr.at("count").get<int>();
  spec.success_rmsle = j.value("successRmsle", spec.success_rmsle);
  return spec;
}

nlohmann::json sweep_spec_to_json(const SweepSpec& spec) {
  return nlohmann::json{
      {"truth", spec.truth},
      {"xGrid", spec.x_grid},
      {"fitMaxCandidates", spec.fit_max_candidates},
      {"testRange",
       {{"xLow", spec.test_range.x_low},
        {"xHigh", spec.test_range.x_high},
        {"count", spec.test_range.count}}},
      {"successRmsle", spec.success_rmsle}};
}

nlohmann::json sweep_result_to_json(const SweepResult& result) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : result.per_threshold) {
    nlohmann::json jr{{"threshold", r.threshold},
                      {"fitPoints", r.fit_points},
                      {"ok", r.ok},
                      {"success", r.success}};
    if (r.ok) {
      jr["rmsle"] = r.rmsle;
      jr["fit"] = r.form;
    } else {
      jr["error"] = r.error;
    }
    arr.push_back(std::move(jr));
  }
  return nlohmann::json{
      {"perThreshold", std::move(arr)},
      {"minimalSuccessfulT",
       result.minimal_successful_t ? nlohmann::json(*result.minimal_successful_t)
                                   : nlohmann::json()}};
}

}  // namespace bnsl
