#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bnsl/forms.hpp"
#include "bnsl/series.hpp"

namespace bnsl {

/// Geometry of the initialization grid. Scale-family parameters (the b of
/// the broken power law, the prefactors of the baseline forms) use a
/// log-uniform multiplier grid [g_low, g_high] around a data-derived
/// center; slope parameters use a linear grid [c_low, c_high]; sharpness
/// parameters use a log-uniform grid [f_low, f_high]; break locations use
/// a log-uniform grid over the observed x range; asymptotes use a linear
/// grid over [0, max y].
struct GridSpec {
  double g_low = 1e-6;
  double g_high = 1e6;
  int g_points = 7;  ///< target points per parameter, >= 2
  double c_low = -1.0;
  double c_high = 3.0;
  double f_low = 1e-3;
  double f_high = 1.0;
  /// Cap on the full factorial. Axis counts are reduced (largest axis
  /// first, later axes on ties) until the product fits.
  std::size_t max_nodes = 200000;
};

/// Box constraints applied during refinement, mirroring the validity
/// ranges of the functional forms.
struct FitBounds {
  double a_min = 0.0;            ///< floor for asymptote-family parameters
  bool allow_negative_a = false; ///< lift the floor for maximized metrics
  double f_min = 1e-6;
  double f_max = 10.0;
};

struct FitConfig {
  GridSpec grid;
  double refine_tolerance = 1e-10;  ///< relative loss decrease that stops refinement
  int max_refine_iters = 10000;
  int multi_start = 8;  ///< grid candidates refined locally
  FitBounds bounds;
  std::uint64_t seed = 0;  ///< reserved for randomized tie-breaking
};

struct FitResult {
  FunctionalForm form;
  double train_loss = 0.0;  ///< stable-MSLE on the fit points
  double start_loss = 0.0;  ///< stable-MSLE at the grid-search optimum
  bool converged = false;
  int iterations = 0;
};

/// Number of packed parameters: m1 2, m2 3, m3 4, m4 5, bnsl 3 + 3n.
int param_count(FormKind kind, int breaks);

/// Packed parameter layouts:
///   m1   [a, b]
///   m2   [a, b, c]
///   m3   [a, b, c, d]
///   m4   [a, b, c, eps0, eps_inf]
///   bnsl [a, b, c0, c1, d1, f1, ..., cn, dn, fn]
/// Broken-power-law breaks are sorted by location on the way out.
FunctionalForm make_form(FormKind kind, int breaks, std::span<const double> theta);
std::vector<double> pack_form(const FunctionalForm& form);

/// Prediction through the packed layout. Returns a non-finite value (rather
/// than throwing) when the parameters cannot produce one, so optimizer
/// probes can be rejected cheaply.
double predict(FormKind kind, int breaks, std::span<const double> theta, double x);

/// Stable-MSLE of the packed parameters against the points; +inf when any
/// prediction is invalid.
double theta_loss(std::span<const SeriesPoint> points, FormKind kind, int breaks,
                  std::span<const double> theta);

/// Per-parameter box derived from the data and config bounds.
struct ParameterBox {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> clamp(std::span<const double> theta) const;
};

ParameterBox derive_box(std::span<const SeriesPoint> train, FormKind kind,
                        int breaks, const FitConfig& cfg);

/// The data-scaled initialization grid, exposed so the node enumeration can
/// be cross-checked independently of the search itself.
class GridAxes {
 public:
  std::size_t axis_count() const { return axes_.size(); }
  std::size_t axis_size(std::size_t axis) const { return axes_[axis].size(); }
  const std::vector<double>& axis_values(std::size_t axis) const { return axes_[axis]; }
  std::size_t node_count() const;

  /// Maps per-axis indices to a packed parameter vector (applying the
  /// data-derived scaling couplings and the parameter box).
  std::vector<double> realize(std::span<const std::size_t> idx) const;

  /// False for structurally skipped nodes (break locations out of order).
  bool node_valid(std::span<const double> theta) const;

 private:
  friend GridAxes build_grid_axes(std::span<const SeriesPoint>, FormKind, int,
                                  const FitConfig&);
  FormKind kind_ = FormKind::m1;
  int breaks_ = 0;
  std::vector<std::vector<double>> axes_;
  double median_x_ = 1.0, median_y_ = 1.0;
  double min_y_ = 1.0, max_y_ = 1.0;
  ParameterBox box_;
};

GridAxes build_grid_axes(std::span<const SeriesPoint> train, FormKind kind,
                         int breaks, const FitConfig& cfg);

/// Evaluates stable-MSLE at every grid node and returns the cfg.multi_start
/// best parameter vectors in ascending loss order; exact loss ties are
/// broken toward the lexicographically smaller vector. Throws DataError
/// when there are fewer points than parameters and FitError when no node
/// has finite loss.
std::vector<std::vector<double>> grid_search(std::span<const SeriesPoint> train,
                                             FormKind kind, int breaks,
                                             const FitConfig& cfg);

/// Damped Gauss-Newton descent on the residuals ln(y+1) - ln(f(x)+1) with a
/// central finite-difference Jacobian, parameters projected into the box
/// after every step. Stops when an accepted step improves the loss by less
/// than cfg.refine_tolerance (relative), when no damping produces descent,
/// or at the iteration cap. Throws FitError when the start point has
/// non-finite loss.
FitResult refine(std::span<const double> start, std::span<const SeriesPoint> train,
                 FormKind kind, int breaks, const FitConfig& cfg);

/// grid_search followed by refinement of each candidate; returns the result
/// with the smallest training loss (ties toward the lexicographically
/// smaller parameter vector). start_loss reports the grid optimum.
FitResult fit(std::span<const SeriesPoint> train, FormKind kind, int breaks,
              const FitConfig& cfg);

struct BreakCountSelection {
  int best_n = 0;
  std::vector<double> validation_rmsle;  ///< indexed by n; +inf for failed fits
};

/// Holds out the holdout_count largest-x points as an internal validation
/// set, fits the broken power law for n = 0..max_n on the remainder, and
/// returns the n with the smallest validation RMSLE (ties toward smaller n).
BreakCountSelection select_break_count(std::span<const SeriesPoint> train,
                                       int max_n, int holdout_count,
                                       const FitConfig& cfg);

struct CropCandidate {
  double crop = 0.0;
  double validation_rmsle = 0.0;
  bool ok = false;
  std::string error;
};

struct CropSelection {
  double best_crop = 0.0;
  std::vector<CropCandidate> candidates;  ///< ascending by crop
};

/// For each crop threshold, discards fit points with x below it, fits the
/// broken power law with the given break count, and scores the same
/// held-out largest-x validation points. Returns the threshold with the
/// smallest validation RMSLE (ties toward the smallest threshold).
/// Individual infeasible candidates are recorded, not fatal; throws
/// DataError when every candidate fails.
CropSelection select_crop_point(std::span<const SeriesPoint> train,
                                std::span<const double> candidate_crops,
                                int breaks, int holdout_count,
                                const FitConfig& cfg);

}  // namespace bnsl
