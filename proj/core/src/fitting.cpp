#include "bnsl/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

#include "bnsl/errors.hpp"

namespace bnsl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlopeLo = -50.0;
constexpr double kSlopeHi = 50.0;
constexpr double kTinyPositive = 1e-30;
constexpr double kHuge = 1e30;
constexpr double kEdge = 1e-9;  // keeps asymptotes strictly off the data

struct DataStats {
  double min_x = 0.0, max_x = 0.0;
  double min_y = 0.0, max_y = 0.0;
  double median_x = 0.0, median_y = 0.0;
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

DataStats compute_stats(std::span<const SeriesPoint> pts) {
  DataStats s;
  std::vector<double> xs, ys;
  xs.reserve(pts.size());
  ys.reserve(pts.size());
  for (const auto& p : pts) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  s.min_x = *std::min_element(xs.begin(), xs.end());
  s.max_x = *std::max_element(xs.begin(), xs.end());
  s.min_y = *std::min_element(ys.begin(), ys.end());
  s.max_y = *std::max_element(ys.begin(), ys.end());
  s.median_x = median_of(std::move(xs));
  s.median_y = median_of(std::move(ys));
  return s;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
  v.back() = hi;
  return v;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  std::vector<double> v = linspace(std::log(lo), std::log(hi), n);
  for (double& x : v) x = std::exp(x);
  return v;
}

/// Symmetric log-spaced grid that avoids zero, for exponents that may take
/// either sign but not vanish.
std::vector<double> signed_logspace(double mag_lo, double mag_hi, std::size_t n) {
  const std::size_t half = (n + 1) / 2;
  std::vector<double> mags = logspace(mag_lo, mag_hi, half);
  std::vector<double> v;
  v.reserve(2 * half);
  for (auto it = mags.rbegin(); it != mags.rend(); ++it) v.push_back(-*it);
  for (double m : mags) v.push_back(m);
  v.resize(n <= v.size() ? n : v.size());
  return v;
}

bool lex_less(std::span<const double> a, std::span<const double> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

BnslParams bnsl_from_theta(int breaks, std::span<const double> theta) {
  BnslParams p;
  p.a = theta[0];
  p.b = theta[1];
  p.c0 = theta[2];
  p.breaks.resize(static_cast<std::size_t>(breaks));
  for (int i = 0; i < breaks; ++i) {
    p.breaks[static_cast<std::size_t>(i)] = {theta[3 + 3 * i], theta[4 + 3 * i],
                                             theta[5 + 3 * i]};
  }
  return p;
}

double validation_rmsle(const FunctionalForm& form, std::span<const SeriesPoint> val) {
  double acc = 0.0;
  for (const auto& p : val) {
    double pred;
    try {
      pred = form(p.x);
    } catch (const std::exception&) {
      return kInf;
    }
    if (!(pred > 0.0) || !std::isfinite(pred)) return kInf;
    const double e = std::log(p.y) - std::log(pred);
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(val.size()));
}

std::vector<SeriesPoint> sorted_by_x(std::span<const SeriesPoint> pts) {
  std::vector<SeriesPoint> v(pts.begin(), pts.end());
  std::stable_sort(v.begin(), v.end(),
                   [](const SeriesPoint& a, const SeriesPoint& b) { return a.x < b.x; });
  return v;
}

}  // namespace

int param_count(FormKind kind, int breaks) {
  switch (kind) {
    case FormKind::m1: return 2;
    case FormKind::m2: return 3;
    case FormKind::m3: return 4;
    case FormKind::m4: return 5;
    case FormKind::bnsl: return 3 + 3 * breaks;
  }
  throw std::invalid_argument("param_count: unknown form kind");
}

FunctionalForm make_form(FormKind kind, int breaks, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != param_count(kind, breaks))
    throw std::invalid_argument("make_form: parameter count mismatch");
  switch (kind) {
    case FormKind::m1: return FunctionalForm(M1Params{theta[0], theta[1]});
    case FormKind::m2: return FunctionalForm(M2Params{theta[0], theta[1], theta[2]});
    case FormKind::m3:
      return FunctionalForm(M3Params{theta[0], theta[1], theta[2], theta[3]});
    case FormKind::m4:
      return FunctionalForm(M4Params{theta[0], theta[1], theta[2], theta[3], theta[4]});
    case FormKind::bnsl: {
      BnslParams p = bnsl_from_theta(breaks, theta);
      std::stable_sort(p.breaks.begin(), p.breaks.end(),
                       [](const Break& u, const Break& v) { return u.d < v.d; });
      return FunctionalForm(p);
    }
  }
  throw std::invalid_argument("make_form: unknown form kind");
}

std::vector<double> pack_form(const FunctionalForm& form) {
  switch (form.kind()) {
    case FormKind::m1: {
      const auto& p = form.m1();
      return {p.a, p.b};
    }
    case FormKind::m2: {
      const auto& p = form.m2();
      return {p.a, p.b, p.c};
    }
    case FormKind::m3: {
      const auto& p = form.m3();
      return {p.a, p.b, p.c, p.d};
    }
    case FormKind::m4: {
      const auto& p = form.m4();
      return {p.a, p.b, p.c, p.eps0, p.eps_inf};
    }
    case FormKind::bnsl: {
      const auto& p = form.bnsl();
      std::vector<double> theta = {p.a, p.b, p.c0};
      for (const auto& br : p.breaks) {
        theta.push_back(br.c);
        theta.push_back(br.d);
        theta.push_back(br.f);
      }
      return theta;
    }
  }
  throw std::invalid_argument("pack_form: unknown form kind");
}

double predict(FormKind kind, int breaks, std::span<const double> theta, double x) {
  switch (kind) {
    case FormKind::m1:
      return theta[0] * std::pow(x, theta[1]);
    case FormKind::m2:
      return theta[0] * std::pow(x, theta[1]) + theta[2];
    case FormKind::m3:
      return theta[0] * std::pow(1.0 / x + theta[3], -theta[1]) + theta[2];
    case FormKind::m4:
      return detail::eval_m4_raw(
          M4Params{theta[0], theta[1], theta[2], theta[3], theta[4]}, x);
    case FormKind::bnsl:
      return detail::eval_bnsl_raw(bnsl_from_theta(breaks, theta), x);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double theta_loss(std::span<const SeriesPoint> points, FormKind kind, int breaks,
                  std::span<const double> theta) {
  if (points.empty()) throw std::invalid_argument("theta_loss: empty point set");
  // The broken power law is rebuilt once here rather than per point; the
  // inverse-form law gets the warm-started solver (points arrive sorted).
  BnslParams bp;
  if (kind == FormKind::bnsl) bp = bnsl_from_theta(breaks, theta);
  detail::M4Forward m4{kind == FormKind::m4
                           ? M4Params{theta[0], theta[1], theta[2], theta[3], theta[4]}
                           : M4Params{}};
  double acc = 0.0;
  for (const auto& p : points) {
    double pred;
    if (kind == FormKind::bnsl) {
      pred = detail::eval_bnsl_raw(bp, p.x);
    } else if (kind == FormKind::m4) {
      pred = m4(p.x);
    } else {
      pred = predict(kind, breaks, theta, p.x);
    }
    if (!std::isfinite(pred) || pred <= -1.0) return kInf;
    const double e = std::log1p(p.y) - std::log1p(pred);
    acc += e * e;
  }
  const double loss = acc / static_cast<double>(points.size());
  return std::isfinite(loss) ? loss : kInf;
}

std::vector<double> ParameterBox::clamp(std::span<const double> theta) const {
  std::vector<double> out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(out[i], lo[i], hi[i]);
  return out;
}

ParameterBox derive_box(std::span<const SeriesPoint> train, FormKind kind,
                        int breaks, const FitConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("derive_box: empty point set");
  const DataStats s = compute_stats(train);
  const double floor = cfg.bounds.allow_negative_a ? -kHuge : cfg.bounds.a_min;
  ParameterBox box;
  auto add = [&box](double lo, double hi) {
    box.lo.push_back(lo);
    box.hi.push_back(std::max(lo, hi));
  };
  switch (kind) {
    case FormKind::m1:
      add(kTinyPositive, kHuge);       // a
      add(kSlopeLo, kSlopeHi);         // b
      break;
    case FormKind::m2:
      add(kTinyPositive, kHuge);
      add(kSlopeLo, kSlopeHi);
      add(floor, kHuge);               // c
      break;
    case FormKind::m3:
      add(kTinyPositive, kHuge);
      add(kSlopeLo, -1e-6);            // b < 0 keeps the form decreasing-saturating
      add(floor, kHuge);
      add(kTinyPositive, kHuge);       // d
      break;
    case FormKind::m4:
      add(1e-6, kSlopeHi);             // a > 0
      add(kTinyPositive, kHuge);       // b > 0
      add(kSlopeLo, kSlopeHi);         // c != 0, enforced by projection
      add(s.max_y * (1.0 + kEdge), kHuge);            // eps0 above the data
      add(floor, s.min_y * (1.0 - kEdge));            // eps_inf below the data
      break;
    case FormKind::bnsl:
      add(floor, kHuge);               // a
      add(kTinyPositive, kHuge);
      add(kSlopeLo, kSlopeHi);         // c0
      for (int i = 0; i < breaks; ++i) {
        add(kSlopeLo, kSlopeHi);       // ci
        add(s.min_x, s.max_x);         // di inside the observed range
        add(cfg.bounds.f_min, cfg.bounds.f_max);
      }
      break;
  }
  return box;
}

std::size_t GridAxes::node_count() const {
  std::size_t n = 1;
  for (const auto& a : axes_) n *= a.size();
  return n;
}

bool GridAxes::node_valid(std::span<const double> theta) const {
  if (kind_ != FormKind::bnsl) return true;
  for (int i = 1; i < breaks_; ++i)
    if (!(theta[4 + 3 * (i - 1)] < theta[4 + 3 * i])) return false;
  return true;
}

std::vector<double> GridAxes::realize(std::span<const std::size_t> idx) const {
  if (idx.size() != axes_.size())
    throw std::invalid_argument("GridAxes::realize: index arity mismatch");
  std::vector<double> theta(axes_.size());
  for (std::size_t i = 0; i < axes_.size(); ++i) theta[i] = axes_[i][idx[i]];
  // Scale couplings: the stored multiplier on the scale axis is resolved
  // against the data medians and the node's own slope, so every slope value
  // gets starts whose predictions pass near the middle of the data.
  switch (kind_) {
    case FormKind::m1:
      theta[0] *= median_y_ * std::pow(median_x_, -theta[1]);
      break;
    case FormKind::m2:
      theta[0] *= median_y_ * std::pow(median_x_, -theta[1]);
      break;
    case FormKind::m3:
      theta[0] *= median_y_ * std::pow(1.0 / median_x_ + theta[3], theta[1]);
      break;
    case FormKind::m4: {
      const double eps0 = max_y_ * (1.0 + theta[3]);
      const double eps_inf = min_y_ * (1.0 - theta[4]);
      theta[3] = eps0;
      theta[4] = eps_inf;
      const double num = median_y_ - eps_inf;
      const double den =
          std::pow(eps0 - median_y_, theta[0]) * std::pow(median_x_, theta[2]);
      theta[1] *= (num > 0.0 && den > 0.0) ? num / den : 1.0;
      break;
    }
    case FormKind::bnsl:
      theta[1] *= median_y_ * std::pow(median_x_, theta[2]);
      break;
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i])) theta[i] = box_.hi[i];
    theta[i] = std::clamp(theta[i], box_.lo[i], box_.hi[i]);
  }
  return theta;
}

GridAxes build_grid_axes(std::span<const SeriesPoint> train, FormKind kind,
                         int breaks, const FitConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("build_grid_axes: empty point set");
  if (cfg.grid.g_points < 2)
    throw std::invalid_argument("build_grid_axes: g_points must be >= 2");
  const DataStats s = compute_stats(train);
  const int p = param_count(kind, breaks);

  std::vector<std::size_t> counts(static_cast<std::size_t>(p),
                                  static_cast<std::size_t>(cfg.grid.g_points));
  auto product = [&counts]() {
    std::size_t n = 1;
    for (std::size_t c : counts) {
      if (c != 0 && n > std::numeric_limits<std::size_t>::max() / c) return std::numeric_limits<std::size_t>::max();
      n *= c;
    }
    return n;
  };
  while (product() > cfg.grid.max_nodes) {
    std::size_t pick = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (counts[i] >= counts[pick]) pick = i;
    if (counts[pick] <= 2) break;  // floor reached; accept the overshoot
    --counts[pick];
  }

  GridAxes axes;
  axes.kind_ = kind;
  axes.breaks_ = breaks;
  axes.median_x_ = s.median_x;
  axes.median_y_ = s.median_y;
  axes.min_y_ = s.min_y;
  axes.max_y_ = s.max_y;
  axes.box_ = derive_box(train, kind, breaks, cfg);

  const GridSpec& g = cfg.grid;
  auto n_of = [&counts](std::size_t i) { return counts[i]; };
  switch (kind) {
    case FormKind::m1:
      axes.axes_.push_back(logspace(g.g_low, g.g_high, n_of(0)));   // a multiplier
      axes.axes_.push_back(linspace(-g.c_high, -g.c_low, n_of(1))); // b
      break;
    case FormKind::m2:
      axes.axes_.push_back(logspace(g.g_low, g.g_high, n_of(0)));
      axes.axes_.push_back(linspace(-g.c_high, -g.c_low, n_of(1)));
      axes.axes_.push_back(linspace(0.0, s.max_y, n_of(2)));        // c offset
      break;
    case FormKind::m3:
      axes.axes_.push_back(logspace(g.g_low, g.g_high, n_of(0)));
      axes.axes_.push_back(linspace(-g.c_high, -0.05, n_of(1)));    // b < 0
      axes.axes_.push_back(linspace(0.0, s.max_y, n_of(2)));
      axes.axes_.push_back(logspace(1.0 / s.max_x, 1.0 / s.min_x, n_of(3)));
      break;
    case FormKind::m4:
      axes.axes_.push_back(logspace(0.2, 5.0, n_of(0)));            // a
      axes.axes_.push_back(logspace(g.g_low, g.g_high, n_of(1)));   // b multiplier
      axes.axes_.push_back(signed_logspace(0.5, g.c_high, n_of(2)));
      axes.axes_.push_back(logspace(1e-4, 10.0, n_of(3)));          // eps0 margin
      axes.axes_.push_back(logspace(1e-4, 1.0, n_of(4)));           // eps_inf margin
      break;
    case FormKind::bnsl:
      axes.axes_.push_back(linspace(0.0, s.max_y, n_of(0)));        // a
      axes.axes_.push_back(logspace(g.g_low, g.g_high, n_of(1)));   // b multiplier
      axes.axes_.push_back(linspace(g.c_low, g.c_high, n_of(2)));   // c0
      for (int i = 0; i < breaks; ++i) {
        const std::size_t base = static_cast<std::size_t>(3 + 3 * i);
        axes.axes_.push_back(linspace(g.c_low, g.c_high, n_of(base)));
        if (s.min_x < s.max_x)
          axes.axes_.push_back(logspace(s.min_x, s.max_x, n_of(base + 1)));
        else
          axes.axes_.push_back({s.min_x});
        axes.axes_.push_back(logspace(g.f_low, g.f_high, n_of(base + 2)));
      }
      break;
  }
  return axes;
}

namespace {

struct RankedNode {
  double loss;
  std::vector<double> theta;
};

bool node_before(const RankedNode& a, const RankedNode& b) {
  if (a.loss != b.loss) return a.loss < b.loss;
  return lex_less(a.theta, b.theta);
}

/// Keeps the best `keep` distinct nodes in (loss, lexicographic) order.
/// Box clamping can alias many raw grid nodes onto one parameter vector;
/// aliases would otherwise crowd out genuinely different starts.
void push_node(std::vector<RankedNode>& top, std::size_t keep, RankedNode&& node) {
  if (top.size() >= keep && !node_before(node, top.back())) return;
  auto pos = std::lower_bound(top.begin(), top.end(), node, node_before);
  if (pos != top.end() && pos->loss == node.loss && pos->theta == node.theta)
    return;
  top.insert(pos, std::move(node));
  if (top.size() > keep) top.pop_back();
}

std::vector<RankedNode> ranked_grid_nodes(std::span<const SeriesPoint> train,
                                          FormKind kind, int breaks,
                                          const FitConfig& cfg) {
  const int p = param_count(kind, breaks);
  if (static_cast<int>(train.size()) < p)
    throw DataError("grid search needs at least " + std::to_string(p) +
                    " points, got " + std::to_string(train.size()));
  const GridAxes axes = build_grid_axes(train, kind, breaks, cfg);
  const std::size_t keep =
      static_cast<std::size_t>(std::max(1, cfg.multi_start));
  const std::size_t total = axes.node_count();

  // Node losses are independent; partitions of the flattened index range
  // produce identical results in any interleaving.
  auto scan = [&](std::size_t begin, std::size_t end) {
    std::vector<RankedNode> top;
    top.reserve(keep + 1);
    std::vector<std::size_t> idx(axes.axis_count());
    std::size_t rem = begin;
    for (std::size_t ax = axes.axis_count(); ax-- > 0;) {
      idx[ax] = rem % axes.axis_size(ax);
      rem /= axes.axis_size(ax);
    }
    for (std::size_t node_i = begin; node_i < end; ++node_i) {
      std::vector<double> theta = axes.realize(idx);
      if (axes.node_valid(theta)) {
        const double loss = theta_loss(train, kind, breaks, theta);
        if (std::isfinite(loss)) push_node(top, keep, {loss, std::move(theta)});
      }
      std::size_t axis = axes.axis_count();
      while (axis > 0) {
        --axis;
        if (++idx[axis] < axes.axis_size(axis)) break;
        idx[axis] = 0;
      }
    }
    return top;
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      total < 8192 ? 1 : std::min<std::size_t>(hw, 16);
  std::vector<RankedNode> top;
  if (workers <= 1) {
    top = scan(0, total);
  } else {
    const std::size_t chunk = (total + workers - 1) / workers;
    std::vector<std::future<std::vector<RankedNode>>> futures;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(total, begin + chunk);
      if (begin >= end) break;
      futures.push_back(std::async(std::launch::async, scan, begin, end));
    }
    for (auto& f : futures)
      for (auto& node : f.get()) push_node(top, keep, std::move(node));
  }
  if (top.empty()) throw FitError("no grid node produced a finite loss");
  return top;
}

/// Central-difference Jacobian of the residual vector. Columns whose probes
/// cannot produce finite residuals fall back to one-sided differences, then
/// to zero.
bool residuals_at(std::span<const SeriesPoint> pts, FormKind kind, int breaks,
                  std::span<const double> theta, Eigen::VectorXd& r) {
  BnslParams bp;
  if (kind == FormKind::bnsl) bp = bnsl_from_theta(breaks, theta);
  detail::M4Forward m4{kind == FormKind::m4
                           ? M4Params{theta[0], theta[1], theta[2], theta[3], theta[4]}
                           : M4Params{}};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double pred;
    if (kind == FormKind::bnsl) {
      pred = detail::eval_bnsl_raw(bp, pts[i].x);
    } else if (kind == FormKind::m4) {
      pred = m4(pts[i].x);
    } else {
      pred = predict(kind, breaks, theta, pts[i].x);
    }
    if (!std::isfinite(pred) || pred <= -1.0) return false;
    r(static_cast<Eigen::Index>(i)) = std::log1p(pts[i].y) - std::log1p(pred);
  }
  return true;
}

void fd_jacobian(std::span<const SeriesPoint> pts, FormKind kind, int breaks,
                 const std::vector<double>& theta, const ParameterBox& box,
                 const Eigen::VectorXd& r0, Eigen::MatrixXd& J) {
  const std::size_t p = theta.size();
  Eigen::VectorXd rp(r0.size()), rm(r0.size());
  std::vector<double> probe = theta;
  for (std::size_t j = 0; j < p; ++j) {
    const double h = 1e-6 * std::max(std::abs(theta[j]), 1.0);
    const double up = std::min(theta[j] + h, box.hi[j]);
    const double dn = std::max(theta[j] - h, box.lo[j]);
    probe[j] = up;
    const bool ok_up = residuals_at(pts, kind, breaks, probe, rp);
    probe[j] = dn;
    const bool ok_dn = residuals_at(pts, kind, breaks, probe, rm);
    probe[j] = theta[j];
    const auto col = static_cast<Eigen::Index>(j);
    if (ok_up && ok_dn && up > dn) {
      J.col(col) = (rp - rm) / (up - dn);
    } else if (ok_up && up > theta[j]) {
      J.col(col) = (rp - r0) / (up - theta[j]);
    } else if (ok_dn && dn < theta[j]) {
      J.col(col) = (r0 - rm) / (theta[j] - dn);
    } else {
      J.col(col).setZero();
    }
  }
}

/// Keeps the saturating form's exponent away from its removable singularity
/// at zero without letting a step silently flip its sign.
void guard_special(FormKind kind, const std::vector<double>& prev,
                   std::vector<double>& next) {
  if (kind != FormKind::m4) return;
  constexpr double kMin = 1e-9;
  if (std::abs(next[2]) < kMin) next[2] = prev[2] < 0.0 ? -kMin : kMin;
}

/// Coordinates that live on a multiplicative scale get per-step factor
/// limits; the rest get additive limits. Without this, one overly long
/// (but still descending) Gauss-Newton step can throw a sharpness or scale
/// parameter across the landscape into a foreign basin, after which the
/// Jacobian column saturates and the parameter is stuck.
std::vector<bool> multiplicative_coords(FormKind kind, int breaks) {
  switch (kind) {
    case FormKind::m1: return {true, false};
    case FormKind::m2: return {true, false, false};
    case FormKind::m3: return {true, false, false, true};
    case FormKind::m4: return {false, true, false, false, false};
    case FormKind::bnsl: {
      std::vector<bool> m = {false, true, false};
      for (int i = 0; i < breaks; ++i) {
        m.push_back(false);  // ci
        m.push_back(true);   // di
        m.push_back(true);   // fi
      }
      return m;
    }
  }
  return {};
}

constexpr double kMaxStepFactor = 3.0;  // per-step bound for scale parameters

void clip_step(const std::vector<bool>& mult, const std::vector<double>& theta,
               std::vector<double>& trial) {
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (mult[j] && theta[j] > 0.0) {
      trial[j] = std::clamp(trial[j], theta[j] / kMaxStepFactor,
                            theta[j] * kMaxStepFactor);
    } else {
      const double cap = std::max(1.0, 0.5 * std::abs(theta[j]));
      trial[j] = std::clamp(trial[j], theta[j] - cap, theta[j] + cap);
    }
  }
}

}  // namespace

std::vector<std::vector<double>> grid_search(std::span<const SeriesPoint> train,
                                             FormKind kind, int breaks,
                                             const FitConfig& cfg) {
  std::vector<RankedNode> top = ranked_grid_nodes(train, kind, breaks, cfg);
  std::vector<std::vector<double>> out;
  out.reserve(top.size());
  for (auto& node : top) out.push_back(std::move(node.theta));
  return out;
}

FitResult refine(std::span<const double> start, std::span<const SeriesPoint> train,
                 FormKind kind, int breaks, const FitConfig& cfg) {
  const int p = param_count(kind, breaks);
  if (static_cast<int>(start.size()) != p)
    throw std::invalid_argument("refine: parameter count mismatch");
  if (train.empty()) throw std::invalid_argument("refine: empty point set");
  const ParameterBox box = derive_box(train, kind, breaks, cfg);
  std::vector<double> theta = box.clamp(start);
  guard_special(kind, theta, theta);

  double loss = theta_loss(train, kind, breaks, theta);
  if (!std::isfinite(loss)) throw FitError("refine: non-finite loss at start point");
  const double start_loss = loss;

  const auto n = static_cast<Eigen::Index>(train.size());
  Eigen::VectorXd r(n);
  Eigen::MatrixXd J(n, p);
  const std::vector<bool> mult = multiplicative_coords(kind, breaks);
  double lambda = 1e-3;
  bool converged = false;
  int iter = 0;

  for (; iter < cfg.max_refine_iters; ++iter) {
    if (!residuals_at(train, kind, breaks, theta, r)) break;
    fd_jacobian(train, kind, breaks, theta, box, r, J);
    const Eigen::MatrixXd jtj = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;

    bool stepped = false;
    while (true) {
      Eigen::MatrixXd damped = jtj;
      for (int j = 0; j < p; ++j)
        damped(j, j) += lambda * std::max(jtj(j, j), kTinyPositive);
      const Eigen::VectorXd delta = damped.ldlt().solve(-g);
      if (delta.allFinite()) {
        std::vector<double> trial(theta);
        for (int j = 0; j < p; ++j) trial[static_cast<std::size_t>(j)] += delta(j);
        clip_step(mult, theta, trial);
        trial = box.clamp(trial);
        guard_special(kind, theta, trial);
        const double trial_loss = theta_loss(train, kind, breaks, trial);
        if (std::isfinite(trial_loss) && trial_loss < loss) {
          const double rel = (loss - trial_loss) / std::max(loss, kTinyPositive);
          theta = std::move(trial);
          loss = trial_loss;
          lambda = std::max(lambda / 3.0, 1e-12);
          stepped = true;
          if (rel < cfg.refine_tolerance) converged = true;
          break;
        }
      }
      lambda *= 4.0;
      if (lambda > 1e14) {
        converged = true;  // no descent direction left at any damping
        break;
      }
    }
    if (!stepped || converged) {
      ++iter;
      break;
    }
  }

  FitResult res;
  res.form = make_form(kind, breaks, theta);
  res.train_loss = loss;
  res.start_loss = start_loss;
  res.converged = converged;
  res.iterations = iter;
  return res;
}

FitResult fit(std::span<const SeriesPoint> train, FormKind kind, int breaks,
              const FitConfig& cfg) {
  const std::vector<RankedNode> candidates =
      ranked_grid_nodes(train, kind, breaks, cfg);
  // Candidate refinements are independent; the reduction below visits them
  // in rank order, so scheduling cannot change the result.
  std::vector<std::future<FitResult>> futures;
  futures.reserve(candidates.size());
  for (const auto& cand : candidates)
    futures.push_back(std::async(std::launch::async, [&train, kind, breaks, &cfg,
                                                      &cand] {
      return refine(cand.theta, train, kind, breaks, cfg);
    }));

  FitResult best;
  std::vector<double> best_theta;
  bool have = false;
  for (auto& future : futures) {
    FitResult res;
    try {
      res = future.get();
    } catch (const FitError&) {
      continue;  // candidate became infeasible; the rest still stand
    }
    std::vector<double> packed = pack_form(res.form);
    if (!have || res.train_loss < best.train_loss ||
        (res.train_loss == best.train_loss && lex_less(packed, best_theta))) {
      best = res;
      best_theta = std::move(packed);
      have = true;
    }
  }
  if (!have) throw FitError("every grid candidate failed to refine");
  best.start_loss = candidates.front().loss;
  return best;
}

BreakCountSelection select_break_count(std::span<const SeriesPoint> train,
                                       int max_n, int holdout_count,
                                       const FitConfig& cfg) {
  if (max_n < 0) throw std::invalid_argument("select_break_count: max_n < 0");
  if (holdout_count < 1)
    throw std::invalid_argument("select_break_count: holdout_count < 1");
  const std::vector<SeriesPoint> pts = sorted_by_x(train);
  const int fit_n = static_cast<int>(pts.size()) - holdout_count;
  if (fit_n < param_count(FormKind::bnsl, max_n))
    throw DataError("break-count selection needs " +
                    std::to_string(param_count(FormKind::bnsl, max_n) + holdout_count) +
                    " points for max_n=" + std::to_string(max_n) + ", got " +
                    std::to_string(pts.size()));
  const std::span<const SeriesPoint> fit_pts(pts.data(),
                                             static_cast<std::size_t>(fit_n));
  const std::span<const SeriesPoint> val(pts.data() + fit_n,
                                         static_cast<std::size_t>(holdout_count));

  BreakCountSelection sel;
  sel.validation_rmsle.assign(static_cast<std::size_t>(max_n) + 1, kInf);
  double best = kInf;
  bool any = false;
  for (int n = 0; n <= max_n; ++n) {
    double score = kInf;
    try {
      const FitResult res = fit(fit_pts, FormKind::bnsl, n, cfg);
      score = validation_rmsle(res.form, val);
    } catch (const std::exception&) {
      score = kInf;
    }
    sel.validation_rmsle[static_cast<std::size_t>(n)] = score;
    const double tol = std::max(1e-12, 1e-6 * best);
    if (!any || score < best - tol) {
      best = score;
      sel.best_n = n;
      any = std::isfinite(score) || any;
    }
  }
  if (!std::isfinite(best)) throw FitError("break-count selection: every fit failed");
  return sel;
}

CropSelection select_crop_point(std::span<const SeriesPoint> train,
                                std::span<const double> candidate_crops,
                                int breaks, int holdout_count,
                                const FitConfig& cfg) {
  if (candidate_crops.empty())
    throw std::invalid_argument("select_crop_point: no candidate crops");
  if (holdout_count < 1)
    throw std::invalid_argument("select_crop_point: holdout_count < 1");
  const std::vector<SeriesPoint> pts = sorted_by_x(train);
  if (static_cast<int>(pts.size()) <= holdout_count)
    throw DataError("crop selection: holdout larger than the point set");
  const int fit_n = static_cast<int>(pts.size()) - holdout_count;
  const std::span<const SeriesPoint> all_fit(pts.data(),
                                             static_cast<std::size_t>(fit_n));
  const std::span<const SeriesPoint> val(pts.data() + fit_n,
                                         static_cast<std::size_t>(holdout_count));
  const int need = param_count(FormKind::bnsl, breaks);

  std::vector<double> crops(candidate_crops.begin(), candidate_crops.end());
  std::sort(crops.begin(), crops.end());
  crops.erase(std::unique(crops.begin(), crops.end()), crops.end());

  CropSelection sel;
  double best = kInf;
  bool any = false;
  for (double crop : crops) {
    CropCandidate cand;
    cand.crop = crop;
    std::vector<SeriesPoint> kept;
    for (const auto& p : all_fit)
      if (p.x >= crop) kept.push_back(p);
    if (static_cast<int>(kept.size()) < need) {
      cand.validation_rmsle = kInf;
      cand.error = "insufficient data: " + std::to_string(kept.size()) +
                   " points after crop, need " + std::to_string(need);
    } else {
      try {
        const FitResult res = fit(kept, FormKind::bnsl, breaks, cfg);
        cand.validation_rmsle = validation_rmsle(res.form, val);
        cand.ok = true;
      } catch (const std::exception& e) {
        cand.validation_rmsle = kInf;
        cand.error = e.what();
      }
    }
    if (cand.ok) {
      const double tol = std::max(1e-12, 1e-6 * best);
      if (!any || cand.validation_rmsle < best - tol) {
        best = cand.validation_rmsle;
        sel.best_crop = crop;
        any = true;
      }
    }
    sel.candidates.push_back(std::move(cand));
  }
  if (!any) throw DataError("crop selection: every candidate crop failed");
  return sel;
}

}  // namespace bnsl
