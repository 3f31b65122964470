#include "CLI11.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bnsl/benchmark.hpp"
#include "bnsl/errors.hpp"
#include "bnsl/fitting.hpp"
#include "bnsl/forms.hpp"
#include "bnsl/json_io.hpp"
#include "bnsl/metrics.hpp"
#include "bnsl/series.hpp"
#include "bnsl/simulate.hpp"
#include "plot_svg.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kDataError = 3;
constexpr int kFitFailure = 4;

json parse_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw bnsl::DataError("cannot open " + path);
  try {
    return json::parse(f, nullptr, true, true);  // allow comments
  } catch (const json::exception& e) {
    throw bnsl::DataError(path + ": " + e.what());
  }
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw bnsl::DataError("cannot write " + path);
  f << content;
}

/// Flags layered over an optional JSON config file; flags win.
struct FitConfigCli {
  std::string config_path;
  int multi_start = 8;
  int grid_points = 7;
  double refine_tolerance = 1e-10;
  int max_refine_iters = 10000;
  std::uint64_t seed = 0;
  CLI::Option *opt_multi = nullptr, *opt_points = nullptr, *opt_tol = nullptr,
              *opt_iters = nullptr, *opt_seed = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "JSON file with fit configuration (partial allowed)");
    opt_multi = cmd->add_option("--multi-start", multi_start,
                                "grid candidates refined locally");
    opt_points = cmd->add_option("--grid-points", grid_points,
                                 "target grid points per parameter");
    opt_tol = cmd->add_option("--refine-tolerance", refine_tolerance,
                              "relative loss decrease that stops refinement");
    opt_iters =
        cmd->add_option("--max-refine-iters", max_refine_iters, "refinement cap");
    opt_seed = cmd->add_option("--seed", seed, "tie-breaking seed")
                   ->envname("BNSL_SEED");
  }

  bnsl::FitConfig resolve() const {
    bnsl::FitConfig cfg;
    if (!config_path.empty()) {
      try {
        cfg = parse_json_file(config_path).get<bnsl::FitConfig>();
      } catch (const json::exception& e) {
        throw bnsl::DataError(config_path + ": " + e.what());
      }
    }
    if (opt_multi->count()) cfg.multi_start = multi_start;
    if (opt_points->count()) cfg.grid.g_points = grid_points;
    if (opt_tol->count()) cfg.refine_tolerance = refine_tolerance;
    if (opt_iters->count()) cfg.max_refine_iters = max_refine_iters;
    if (opt_seed->count()) cfg.seed = seed;
    return cfg;
  }
};

json test_metrics_json(const bnsl::FunctionalForm& form,
                       const std::vector<bnsl::SeriesPoint>& test) {
  std::vector<bnsl::PredictionPair> pairs;
  pairs.reserve(test.size());
  for (const auto& p : test) {
    double pred;
    try {
      pred = form(p.x);
    } catch (const std::exception& e) {
      return json{{"valid", false}, {"error", e.what()}};
    }
    if (!(pred > 0.0) || !std::isfinite(pred))
      return json{{"valid", false},
                  {"error", "non-positive prediction at x=" + std::to_string(p.x)}};
    pairs.push_back({p.y, pred});
  }
  return json{{"valid", true},
              {"count", test.size()},
              {"rmsle", bnsl::rmsle(pairs)},
              {"rootStandardLogError", bnsl::root_standard_log_error(pairs)}};
}

bnsl::FunctionalForm form_from_document(const json& j) {
  if (j.is_object() && j.contains("fit") && j.at("fit").is_object() &&
      j.at("fit").contains("form"))
    return j.at("fit").at("form").get<bnsl::FunctionalForm>();
  if (j.is_object() && j.contains("form"))
    return j.at("form").get<bnsl::FunctionalForm>();
  if (j.is_object() && j.contains("kind")) return j.get<bnsl::FunctionalForm>();
  if (j.is_object() && j.contains("c0")) return bnsl::FunctionalForm(j.get<bnsl::BnslParams>());
  throw bnsl::DataError("no functional form found in document");
}

// ---- fit ----------------------------------------------------------------

struct FitArgs {
  std::string data_path, output_path, form_name = "bnsl";
  int breaks = 0;
  int auto_breaks = -1;
  int holdout = 0;  // 0: max(2, 10% of train)
  std::vector<double> crop_candidates;
  FitConfigCli cfg;
};

int run_fit(const FitArgs& args) {
  bnsl::DataSeries series = bnsl::load_series(args.data_path);
  const bnsl::FormKind kind = bnsl::form_kind_from_string(args.form_name);
  const bnsl::FitConfig cfg = args.cfg.resolve();
  std::vector<bnsl::SeriesPoint> train = series.train_points();
  const std::vector<bnsl::SeriesPoint> test = series.test_points();

  json out{{"task", series.task_name}, {"domain", series.domain_tag}};
  int breaks = 0;
  if (kind == bnsl::FormKind::bnsl) {
    breaks = args.breaks;
    const int holdout =
        args.holdout > 0
            ? args.holdout
            : std::max(2, static_cast<int>(std::lround(0.1 * train.size())));
    if (args.auto_breaks >= 0) {
      const bnsl::BreakCountSelection sel =
          bnsl::select_break_count(train, args.auto_breaks, holdout, cfg);
      breaks = sel.best_n;
      json scores = json::array();
      for (double r : sel.validation_rmsle) scores.push_back(bnsl::json_number(r));
      out["breakSelection"] = json{{"bestN", sel.best_n},
                                   {"holdout", holdout},
                                   {"validationRmsle", std::move(scores)}};
    }
    if (!args.crop_candidates.empty()) {
      const bnsl::CropSelection sel = bnsl::select_crop_point(
          train, args.crop_candidates, breaks, holdout, cfg);
      json cands = json::array();
      for (const auto& c : sel.candidates) {
        json jc{{"crop", c.crop},
                {"ok", c.ok},
                {"validationRmsle", bnsl::json_number(c.validation_rmsle)}};
        if (!c.ok) jc["error"] = c.error;
        cands.push_back(std::move(jc));
      }
      out["cropSelection"] =
          json{{"bestCrop", sel.best_crop}, {"candidates", std::move(cands)}};
      std::erase_if(train,
                    [&sel](const bnsl::SeriesPoint& p) { return p.x < sel.best_crop; });
    }
  }
  const bnsl::FitResult res = bnsl::fit(train, kind, breaks, cfg);
  out["fit"] = res;
  if (kind == bnsl::FormKind::bnsl) out["breaks"] = breaks;
  if (!test.empty()) out["testMetrics"] = test_metrics_json(res.form, test);
  write_output(args.output_path, bnsl::dump_report(out));
  return kOk;
}

// ---- bench --------------------------------------------------------------

struct BenchArgs {
  std::string manifest_path, out_dir;
  std::vector<std::string> form_names;
  bnsl::BenchmarkOptions opts;
  FitConfigCli cfg;
};

std::string task_file_name(const std::string& task) {
  std::string name;
  for (char c : task)
    name += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
             c == '.')
                ? c
                : '_';
  if (name.empty()) name = "task";
  return name;
}

int run_bench(const BenchArgs& args) {
  bnsl::BenchmarkOptions opts = args.opts;
  opts.fit = args.cfg.resolve();
  for (const auto& name : args.form_names)
    opts.forms.push_back(bnsl::form_kind_from_string(name));
  const std::vector<bnsl::ManifestEntry> entries =
      bnsl::load_manifest(args.manifest_path);
  std::vector<bnsl::DataSeries> tasks;
  tasks.reserve(entries.size());
  for (const auto& e : entries) {
    bnsl::DataSeries s = bnsl::load_series(e.path);
    s.task_name = e.name;
    s.domain_tag = e.domain;
    tasks.push_back(std::move(s));
  }
  const bnsl::BenchmarkReport report = bnsl::run_benchmark(tasks, opts);

  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);
  if (ec) throw bnsl::DataError("cannot create " + args.out_dir + ": " + ec.message());
  const std::filesystem::path dir(args.out_dir);
  std::map<std::string, int> used;
  for (const auto& t : report.tasks) {
    std::string stem = task_file_name(t.task);
    const int n = ++used[stem];
    if (n > 1) stem += "-" + std::to_string(n);
    write_output((dir / (stem + ".json")).string(),
                 bnsl::dump_report(bnsl::task_report_to_json(t)));
  }
  const std::string text = bnsl::dump_report(bnsl::report_to_json(report));
  write_output((dir / "report.json").string(), text);
  write_output((dir / "report.md").string(), bnsl::report_to_markdown(report));
  std::cout << text;
  return kOk;
}

// ---- decompose ----------------------------------------------------------

struct DecomposeArgs {
  std::string params_path, output_path;
};

int run_decompose(const DecomposeArgs& args) {
  const bnsl::FunctionalForm form = form_from_document(parse_json_file(args.params_path));
  if (form.kind() != bnsl::FormKind::bnsl)
    throw bnsl::DataError("decompose needs a broken power law, got " +
                          std::string(bnsl::to_string(form.kind())));
  const bnsl::BnslParams& params = form.bnsl();
  try {
    bnsl::validate(params);
  } catch (const std::invalid_argument& e) {
    throw bnsl::DataError(std::string("invalid parameters: ") + e.what());
  }
  json out{{"params", params}, {"segments", bnsl::decompose(params)}};
  write_output(args.output_path, bnsl::dump_report(out));
  return kOk;
}

// ---- simulate -----------------------------------------------------------

struct SimulateArgs {
  std::string spec_path, output_path;
  FitConfigCli cfg;
};

int run_simulate(const SimulateArgs& args) {
  bnsl::SweepSpec spec;
  try {
    spec = bnsl::sweep_spec_from_json(parse_json_file(args.spec_path));
  } catch (const json::exception& e) {
    throw bnsl::DataError(args.spec_path + ": " + e.what());
  }
  const bnsl::SweepResult result = bnsl::run_sweep(spec, args.cfg.resolve());
  write_output(args.output_path, bnsl::dump_report(bnsl::sweep_result_to_json(result)));
  return kOk;
}

// ---- plot ---------------------------------------------------------------

struct PlotArgs {
  std::string data_path, output_path, title;
  std::vector<std::string> fit_paths;
  bool linear_x = false, linear_y = false, segments = false;
  int width = 960, height = 640, samples_per_decade = 50;
};

int run_plot(const PlotArgs& args) {
  const bnsl::DataSeries series = bnsl::load_series(args.data_path);
  bnsl::tools::PlotSpec spec;
  spec.width = args.width;
  spec.height = args.height;
  spec.samples_per_decade = args.samples_per_decade;
  spec.log_x = !args.linear_x;
  spec.log_y = !args.linear_y;
  spec.title = args.title.empty() ? series.task_name : args.title;

  std::vector<bnsl::tools::PlotCurve> curves;
  for (const auto& path : args.fit_paths) {
    bnsl::tools::PlotCurve curve;
    curve.form = form_from_document(parse_json_file(path));
    curve.label = bnsl::to_string(curve.form.kind());
    curves.push_back(std::move(curve));
    if (args.segments && curve.form.kind() == bnsl::FormKind::bnsl) {
      for (const auto& seg : bnsl::decompose(curves.back().form.bnsl())) {
        bnsl::tools::PlotCurve sc;
        sc.form = bnsl::FunctionalForm(
            bnsl::M1Params{seg.coefficient, seg.exponent});
        sc.label = "segment " + std::to_string(seg.index);
        sc.dashed = true;
        curves.push_back(std::move(sc));
      }
    }
  }
  write_output(args.output_path,
               bnsl::tools::render_svg(spec, series.points, curves));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit, benchmark, decompose, and extrapolate scaling curves"};
  app.set_version_flag("--version", "bnsl 0.1.0");
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one functional form to a series");
  fit_cmd->add_option("--data", fit_args.data_path, "series CSV (x,y,split)")
      ->required();
  fit_cmd->add_option("--form", fit_args.form_name, "m1|m2|m3|m4|bnsl")
      ->check(CLI::IsMember({"m1", "m2", "m3", "m4", "bnsl"}));
  fit_cmd->add_option("--breaks", fit_args.breaks, "break count (bnsl)")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--auto-breaks", fit_args.auto_breaks,
                      "choose the break count in 0..N by holdout validation")
      ->check(CLI::NonNegativeNumber)
      ->excludes("--breaks");
  fit_cmd->add_option("--holdout", fit_args.holdout,
                      "validation points held out from the large-x end "
                      "(default: max(2, 10%))");
  fit_cmd->add_option("--crop-candidates", fit_args.crop_candidates,
                      "comma-separated crop thresholds to try")
      ->delimiter(',');
  fit_cmd->add_option("--out", fit_args.output_path, "write JSON here (default stdout)");
  fit_args.cfg.attach(fit_cmd);

  BenchArgs bench_args;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Run the extrapolation benchmark over a manifest");
  bench_cmd->add_option("--manifest", bench_args.manifest_path, "task manifest JSON")
      ->required();
  bench_cmd
      ->add_option("--out", bench_args.out_dir,
                   "directory for per-task JSON, report.json, and report.md")
      ->required();
  bench_cmd
      ->add_option("--forms", bench_args.form_names,
                   "candidate forms (default: all five)")
      ->delimiter(',')
      ->check(CLI::IsMember({"m1", "m2", "m3", "m4", "bnsl"}));
  bench_cmd->add_option("--max-breaks", bench_args.opts.max_breaks,
                        "largest break count tried");
  bench_cmd->add_option("--jobs", bench_args.opts.jobs, "tasks evaluated concurrently")
      ->check(CLI::PositiveNumber);
  bench_args.cfg.attach(bench_cmd);

  DecomposeArgs dec_args;
  CLI::App* dec_cmd = app.add_subcommand(
      "decompose", "Split a broken power law into its power-law segments");
  dec_cmd->add_option("--params", dec_args.params_path,
                      "JSON with parameters or a fit result")
      ->required();
  dec_cmd->add_option("--out", dec_args.output_path, "write JSON here (default stdout)");

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "Sweep fit-range cutoffs against a known generating curve");
  sim_cmd->add_option("--spec", sim_args.spec_path, "sweep specification JSON")
      ->required();
  sim_cmd->add_option("--out", sim_args.output_path, "write the sweep result here")
      ->required();
  sim_args.cfg.attach(sim_cmd);

  PlotArgs plot_args;
  CLI::App* plot_cmd = app.add_subcommand("plot", "Render a series and fits as SVG");
  plot_cmd->add_option("--data", plot_args.data_path, "series CSV")
      ->required();
  plot_cmd->add_option("--fit", plot_args.fit_paths, "fit JSON (repeatable)");
  plot_cmd->add_flag("--segments", plot_args.segments,
                     "overlay the power-law segments of broken-power-law fits");
  plot_cmd->add_flag("--linear-x", plot_args.linear_x, "linear x axis");
  plot_cmd->add_flag("--linear-y", plot_args.linear_y, "linear y axis");
  plot_cmd->add_option("--title", plot_args.title, "plot title");
  plot_cmd->add_option("--width", plot_args.width, "canvas width in pixels")
      ->check(CLI::PositiveNumber);
  plot_cmd->add_option("--height", plot_args.height, "canvas height in pixels")
      ->check(CLI::PositiveNumber);
  plot_cmd
      ->add_option("--samples-per-decade", plot_args.samples_per_decade,
                   "curve sampling density")
      ->check(CLI::Range(2, 100000));
  plot_cmd->add_option("--out", plot_args.output_path, "write the SVG here")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (bench_cmd->parsed()) return run_bench(bench_args);
    if (dec_cmd->parsed()) return run_decompose(dec_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (plot_cmd->parsed()) return run_plot(plot_args);
  } catch (const bnsl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const bnsl::FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return kFitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
