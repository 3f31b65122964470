#include "bnsl/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <sstream>

#include "bnsl/errors.hpp"
#include "bnsl/json_io.hpp"
#include "bnsl/metrics.hpp"

namespace bnsl {

namespace {

constexpr double kWinnerTie = 1e-12;
constexpr FormKind kOrder[] = {FormKind::m1, FormKind::m2, FormKind::m3,
                               FormKind::m4, FormKind::bnsl};

// Table headings use the upper-case names; JSON keys keep to_string's
// lower-case spelling.
const char* heading(FormKind kind) {
  switch (kind) {
    case FormKind::m1: return "M1";
    case FormKind::m2: return "M2";
    case FormKind::m3: return "M3";
    case FormKind::m4: return "M4";
    case FormKind::bnsl: return "BNSL";
  }
  return "?";
}

void score_on_test(FormOutcome& out, std::span<const SeriesPoint> test) {
  std::vector<PredictionPair> pairs;
  pairs.reserve(test.size());
  for (const auto& p : test) {
    double pred;
    try {
      pred = out.form(p.x);
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = std::string("prediction failed at x=") + std::to_string(p.x) +
                  ": " + e.what();
      return;
    }
    if (!(pred > 0.0) || !std::isfinite(pred)) {
      out.ok = false;
      out.error = "non-positive prediction at x=" + std::to_string(p.x);
      return;
    }
    pairs.push_back({p.y, pred});
  }
  out.test_rmsle = rmsle(pairs);
  out.test_rsle = root_standard_log_error(pairs);
}

FormOutcome fit_baseline(FormKind kind, std::span<const SeriesPoint> train,
                         std::span<const SeriesPoint> test, const FitConfig& cfg) {
  FormOutcome out;
  out.kind = kind;
  try {
    const FitResult res = fit(train, kind, 0, cfg);
    out.form = res.form;
    out.train_loss = res.train_loss;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
    return out;
  }
  score_on_test(out, test);
  return out;
}

FormOutcome fit_broken_power_law(std::span<const SeriesPoint> train,
                                 std::span<const SeriesPoint> test,
                                 const BenchmarkOptions& opts) {
  FormOutcome out;
  out.kind = FormKind::bnsl;
  const int n_train = static_cast<int>(train.size());
  const int holdout =
      std::max(2, static_cast<int>(std::lround(0.1 * static_cast<double>(n_train))));
  int max_n = -1;
  for (int n = 0; n <= opts.max_breaks; ++n)
    if (param_count(FormKind::bnsl, n) <= n_train - holdout) max_n = n;
  if (max_n < 0) {
    out.error = "insufficient data: " + std::to_string(n_train) +
                " train points cannot support break-count selection";
    return out;
  }
  try {
    const BreakCountSelection sel =
        select_break_count(train, max_n, holdout, opts.fit);
    out.breaks = sel.best_n;
    const FitResult res = fit(train, FormKind::bnsl, sel.best_n, opts.fit);
    out.form = res.form;
    out.train_loss = res.train_loss;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
    return out;
  }
  score_on_test(out, test);
  return out;
}

}  // namespace

const FormOutcome* TaskReport::outcome(FormKind kind) const {
  for (const auto& o : outcomes)
    if (o.kind == kind) return &o;
  return nullptr;
}

double WinTally::percent(const std::string& form) const {
  if (decided == 0) return 0.0;
  const auto it = wins.find(form);
  const int n = it == wins.end() ? 0 : it->second;
  return 100.0 * static_cast<double>(n) / static_cast<double>(decided);
}

TaskReport evaluate_task(const DataSeries& series, const BenchmarkOptions& opts) {
  TaskReport report;
  report.task = series.task_name;
  report.domain = series.domain_tag;
  const std::vector<SeriesPoint> train = series.train_points();
  const std::vector<SeriesPoint> test = series.test_points();
  if (train.empty() || test.empty())
    throw DataError("task '" + series.task_name + "' lacks a train/test split");

  const auto wanted = [&opts](FormKind kind) {
    return opts.forms.empty() ||
           std::find(opts.forms.begin(), opts.forms.end(), kind) != opts.forms.end();
  };
  for (const FormKind kind : kOrder) {
    if (!wanted(kind)) continue;
    if (kind == FormKind::bnsl)
      report.outcomes.push_back(fit_broken_power_law(train, test, opts));
    else
      report.outcomes.push_back(fit_baseline(kind, train, test, opts.fit));
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : report.outcomes) {
    if (!o.ok) continue;
    if (!report.winner || o.test_rmsle < best - kWinnerTie) {
      best = o.test_rmsle;
      report.winner = o.kind;
    }
  }
  return report;
}

BenchmarkReport run_benchmark(const std::vector<DataSeries>& tasks,
                              const BenchmarkOptions& opts) {
  BenchmarkReport report;
  report.tasks.resize(tasks.size());
  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1 || tasks.size() <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      report.tasks[i] = evaluate_task(tasks[i], opts);
  } else {
    std::vector<std::future<TaskReport>> futures(tasks.size());
    std::size_t next = 0;
    while (next < tasks.size()) {
      const std::size_t batch_end =
          std::min(tasks.size(), next + static_cast<std::size_t>(jobs));
      for (std::size_t i = next; i < batch_end; ++i)
        futures[i] = std::async(std::launch::async,
                                [&tasks, &opts, i] { return evaluate_task(tasks[i], opts); });
      for (std::size_t i = next; i < batch_end; ++i) report.tasks[i] = futures[i].get();
      next = batch_end;
    }
  }
  for (const auto& t : report.tasks) {
    if (!t.winner) continue;
    const std::string name = to_string(*t.winner);
    ++report.overall.decided;
    ++report.overall.wins[name];
    WinTally& tally = report.by_domain[t.domain];
    ++tally.decided;
    ++tally.wins[name];
  }
  return report;
}

std::string sci_format(double v, int significant) {
  if (v == 0.0) return "0";
  if (!std::isfinite(v)) return v > 0 ? "inf" : (std::isnan(v) ? "nan" : "-inf");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*e", significant - 1, v);
  std::string s(buf);
  // strip exponent padding: 3.79e-03 -> 3.79e-3, 1.2e+01 -> 1.2e1
  const std::size_t e = s.find('e');
  std::string mantissa = s.substr(0, e);
  std::string exp = s.substr(e + 1);
  bool neg = false;
  if (!exp.empty() && (exp[0] == '+' || exp[0] == '-')) {
    neg = exp[0] == '-';
    exp.erase(0, 1);
  }
  while (exp.size() > 1 && exp[0] == '0') exp.erase(0, 1);
  return mantissa + "e" + (neg ? "-" : "") + exp;
}

std::string format_cell(const FormOutcome& outcome) {
  if (!outcome.ok) return "—";
  return sci_format(outcome.test_rmsle, 3) + " ± " +
         sci_format(outcome.test_rsle, 2);
}

namespace {

nlohmann::json tally_to_json(const WinTally& tally) {
  nlohmann::json percent = nlohmann::json::object();
  for (const auto& [form, n] : tally.wins) {
    (void)n;
    percent[form] = tally.percent(form);
  }
  return nlohmann::json{
      {"decided", tally.decided}, {"wins", tally.wins}, {"percent", percent}};
}

}  // namespace

nlohmann::json task_report_to_json(const TaskReport& t) {
  nlohmann::json outcomes = nlohmann::json::array();
  for (const auto& o : t.outcomes) {
    nlohmann::json jo{{"form", to_string(o.kind)}, {"ok", o.ok}};
    if (o.ok) {
      jo["testRmsle"] = o.test_rmsle;
      jo["testRootStandardLogError"] = o.test_rsle;
      jo["trainLoss"] = o.train_loss;
      jo["fit"] = o.form;
      if (o.kind == FormKind::bnsl) jo["breaks"] = o.breaks;
    } else {
      jo["error"] = o.error;
    }
    outcomes.push_back(std::move(jo));
  }
  return nlohmann::json{
      {"task", t.task},
      {"domain", t.domain},
      {"outcomes", std::move(outcomes)},
      {"winner", t.winner ? nlohmann::json(to_string(*t.winner)) : nlohmann::json()}};
}

nlohmann::json report_to_json(const BenchmarkReport& report) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : report.tasks) tasks.push_back(task_report_to_json(t));
  nlohmann::json by_domain = nlohmann::json::object();
  for (const auto& [domain, tally] : report.by_domain)
    by_domain[domain] = tally_to_json(tally);
  return nlohmann::json{{"tasks", std::move(tasks)},
                        {"summary",
                         {{"byDomain", std::move(by_domain)},
                          {"overall", tally_to_json(report.overall)}}}};
}

namespace {

std::string percent_cell(const WinTally& tally, FormKind kind) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", tally.percent(to_string(kind)));
  return buf;
}

}  // namespace

std::string report_to_markdown(const BenchmarkReport& report) {
  std::ostringstream os;
  os << "| Task |";
  for (const FormKind kind : kOrder) os << ' ' << heading(kind) << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < std::size(kOrder); ++i) os << "---|";
  os << '\n';
  for (const auto& t : report.tasks) {
    os << "| " << t.task << " |";
    for (const FormKind kind : kOrder) {
      const FormOutcome* o = t.outcome(kind);
      std::string cell = o ? format_cell(*o) : "—";
      if (o && t.winner && *t.winner == kind) cell = "**" + cell + "**";
      os << ' ' << cell << " |";
    }
    os << '\n';
  }
  os << "\n| Domain |";
  for (const FormKind kind : kOrder) os << ' ' << heading(kind) << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < std::size(kOrder); ++i) os << "---|";
  os << '\n';
  for (const auto& [domain, tally] : report.by_domain) {
    os << "| " << domain << " |";
    for (const FormKind kind : kOrder) os << ' ' << percent_cell(tally, kind) << " |";
    os << '\n';
  }
  os << "| overall |";
  for (const FormKind kind : kOrder) os << ' ' << percent_cell(report.overall, kind) << " |";
  os << '\n';
  return os.str();
}

}  // namespace bnsl
