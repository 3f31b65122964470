#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bnsl/fitting.hpp"
#include "bnsl/series.hpp"

namespace bnsl {

/// One functional form evaluated on one task's held-out test points.
struct FormOutcome {
  FormKind kind = FormKind::m1;
  int breaks = 0;  ///< selected break count (broken power law only)
  bool ok = false;
  std::string error;
  double test_rmsle = 0.0;
  double test_rsle = 0.0;  ///< spread of the squared log errors
  double train_loss = 0.0;
  FunctionalForm form;
};

struct TaskReport {
  std::string task;
  std::string domain;
  std::vector<FormOutcome> outcomes;  ///< m1, m2, m3, m4, bnsl in that order
  std::optional<FormKind> winner;     ///< smallest test RMSLE, if any fit succeeded
  const FormOutcome* outcome(FormKind kind) const;
};

struct BenchmarkOptions {
  int max_breaks = 3;           ///< largest break count tried during selection
  int jobs = 1;                 ///< tasks evaluated concurrently
  std::vector<FormKind> forms;  ///< candidate forms; empty means all five
  FitConfig fit;
};

/// Wins and win percentages for one reporting scope (a domain tag or the
/// overall row). Percentages are out of the tasks that produced a winner,
/// so each row sums to 100 up to rounding.
struct WinTally {
  int decided = 0;  ///< tasks with a winner
  std::map<std::string, int> wins;
  double percent(const std::string& form) const;
};

struct BenchmarkReport {
  std::vector<TaskReport> tasks;  ///< manifest order
  std::map<std::string, WinTally> by_domain;
  WinTally overall;
};

/// Fits each requested form (broken power law break count chosen by
/// internal holdout of max(2, 10% of train) largest-x points, capped so the
/// remaining points can still determine the parameters), scores the test
/// points, and picks the winner by test RMSLE. RMSLE ties within 1e-12
/// resolve toward the earlier form in the listed order. Per-form failures
/// are recorded, not fatal.
TaskReport evaluate_task(const DataSeries& series, const BenchmarkOptions& opts);

/// evaluate_task over every series, optionally in parallel; report order
/// and content are independent of opts.jobs.
BenchmarkReport run_benchmark(const std::vector<DataSeries>& tasks,
                              const BenchmarkOptions& opts);

/// "3.79e-3" style: three significant digits, exponent without padding.
std::string sci_format(double v, int significant);

/// "3.79e-3 ± 1.1e-3" (RMSLE to three digits, spread to two, exact zero
/// spread as "0"); failed outcomes render as an em dash.
std::string format_cell(const FormOutcome& outcome);

nlohmann::json task_report_to_json(const TaskReport& report);
nlohmann::json report_to_json(const BenchmarkReport& report);

/// Two tables: per-task `Task | M1 | M2 | M3 | M4 | BNSL` rows with
/// `rmsle ± rsle` cells (winner bolded), then the per-domain win-percentage
/// summary with an overall row.
std::string report_to_markdown(const BenchmarkReport& report);

}  // namespace bnsl
