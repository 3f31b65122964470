#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "bnsl/fitting.hpp"
#include "bnsl/forms.hpp"
#include "bnsl/series.hpp"

namespace bnsl {

/// Noiseless evaluation of the broken power law on the grid; points come
/// back sorted by x and marked as training points.
std::vector<SeriesPoint> generate_noiseless(const BnslParams& truth,
                                            std::span<const double> xs);

/// A sweep over fit-range cutoffs against a known generating curve: for
/// each threshold T, fit on the grid points with x <= T and score the
/// extrapolation on a fixed probe grid beyond every threshold.
struct TestRange {
  double x_low = 0.0;
  double x_high = 0.0;
  int count = 0;  ///< log-spaced probe abscissae
};

struct SweepSpec {
  BnslParams truth;
  std::vector<double> x_grid;              ///< sampling abscissae, ascending
  std::vector<double> fit_max_candidates;  ///< fit-range cutoffs T to try
  TestRange test_range;                    ///< probes; all above max cutoff
  double success_rmsle = 1e-2;  ///< extrapolation RMSLE counted as success
};

struct ThresholdResult {
  double threshold = 0.0;
  int fit_points = 0;
  bool ok = false;  ///< a fit was produced and scored
  std::string error;
  double rmsle = 0.0;  ///< extrapolation RMSLE on the probes (valid when ok)
  bool success = false;
  FunctionalForm form;  ///< fitted curve (valid when ok)
};

struct SweepResult {
  std::vector<ThresholdResult> per_threshold;  ///< ascending by threshold
  std::optional<double> minimal_successful_t;
};

/// Fits a broken power law with the truth's break count below each cutoff
/// and scores it against the exact curve on the probe grid. Thresholds
/// leaving fewer fit points than parameters are recorded as failures
/// rather than raising. Throws DataError when the spec has no grid, no
/// thresholds, a degenerate probe range, or a probe at or below the
/// largest cutoff.
SweepResult run_sweep(const SweepSpec& spec, const FitConfig& cfg);

/// Keys: truth, xGrid, fitMaxCandidates, testRange {xLow, xHigh, count},
/// successRmsle (optional).
SweepSpec sweep_spec_from_json(const nlohmann::json& j);
nlohmann::json sweep_spec_to_json(const SweepSpec& spec);
nlohmann::json sweep_result_to_json(const SweepResult& result);

}  // namespace bnsl
