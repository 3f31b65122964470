#include "bnsl/forms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bnsl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Above this value of (z - ln d) / f the linear-space intermediate
// (x/d)^{1/f} is treated as overflowing and evaluation is routed through
// the log-space path.
constexpr double kLogRouteThreshold = 500.0;

// Bisection settings for the M4 forward map.
constexpr int kM4MaxIter = 200;
constexpr double kM4Tol = 1e-12;

void check_positive_x(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("x must be positive, got " + std::to_string(x));
  }
}

}  // namespace

void validate(const BnslParams& params) {
  if (!std::isfinite(params.a) || !std::isfinite(params.b) ||
      !std::isfinite(params.c0)) {
    throw std::invalid_argument("BnslParams: a, b, c0 must be finite");
  }
  double prev_d = 0.0;
  for (const Break& br : params.breaks) {
    if (!(br.d > 0.0) || !std::isfinite(br.d)) {
      throw std::invalid_argument("BnslParams: break location d must be positive and finite");
    }
    if (!(br.f > 0.0) || !std::isfinite(br.f)) {
      throw std::invalid_argument("BnslParams: break sharpness f must be positive and finite");
    }
    if (!std::isfinite(br.c)) {
      throw std::invalid_argument("BnslParams: break slope change c must be finite");
    }
    if (!(br.d > prev_d)) {
      throw std::invalid_argument("BnslParams: breaks must be sorted strictly ascending by d");
    }
    prev_d = br.d;
  }
}

double softplus(double u) {
  // For u > 40, log1p(exp(u)) == u to double precision.
  if (u > 40.0) return u;
  return std::log1p(std::exp(u));
}

namespace detail {

double eval_bnsl_log_raw(const BnslParams& params, double z) noexcept {
  double acc = std::log(params.b) - params.c0 * z;
  for (const Break& br : params.breaks) {
    const double u = (z - std::log(br.d)) / br.f;
    acc -= br.c * br.f * softplus(u);
  }
  return acc;
}

double eval_bnsl_raw(const BnslParams& params, double x) noexcept {
  const double z = std::log(x);

  bool route_log = false;
  for (const Break& br : params.breaks) {
    if ((z - std::log(br.d)) / br.f > kLogRouteThreshold) {
      route_log = true;
      break;
    }
  }

  if (!route_log) {
    double value = params.b * std::pow(x, -params.c0);
    for (const Break& br : params.breaks) {
      value *= std::pow(1.0 + std::pow(x / br.d, 1.0 / br.f), -br.c * br.f);
    }
    if (std::isfinite(value)) return params.a + value;
    // A factor overflowed even though no intermediate tripped the
    // threshold; the log-space path may still represent the value.
  }

  return params.a + std::exp(eval_bnsl_log_raw(params, z));
}

namespace {

// Bisection on h(y) = ln(y - eps_inf) - ln b - a ln(eps0 - y) against
// t = c ln x. Comparing g(y) = exp(h(y)/c) with x through h avoids three
// pow calls per probe, which dominates the fitting hot path.
double m4_bisect(const M4Params& params, double t, double lo, double hi) noexcept {
  const double lnb = std::log(params.b);
  const auto h = [&params, lnb](double y) {
    return std::log(y - params.eps_inf) - lnb -
           params.a * std::log(params.eps0 - y);
  };
  const double h_lo = h(lo);
  const double h_hi = h(hi);
  if (std::isnan(h_lo) || std::isnan(h_hi)) return kNan;
  const bool increasing = h_lo < h_hi;
  if (t < std::min(h_lo, h_hi) || t > std::max(h_lo, h_hi)) return kNan;

  for (int iter = 0; iter < kM4MaxIter; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if ((h(mid) < t) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < kM4Tol) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double eval_m4_raw(const M4Params& params, double x) noexcept {
  const double width = params.eps0 - params.eps_inf;
  const double pad = 1e-12 * width;
  const double lo = params.eps_inf + pad;
  const double hi = params.eps0 - pad;
  if (!(lo < hi)) return kNan;
  return m4_bisect(params, params.c * std::log(x), lo, hi);
}

namespace {

// Newton iteration on h with a bisection safeguard; lands within the same
// tolerance as m4_bisect but needs far fewer probes when started close.
double m4_newton(const M4Params& params, double t, double lo, double hi,
                 double y0) noexcept {
  const double lnb = std::log(params.b);
  const auto h = [&params, lnb](double y) {
    return std::log(y - params.eps_inf) - lnb -
           params.a * std::log(params.eps0 - y);
  };
  const double h_lo = h(lo);
  const double h_hi = h(hi);
  if (std::isnan(h_lo) || std::isnan(h_hi)) return kNan;
  const bool increasing = h_lo < h_hi;
  if (t < std::min(h_lo, h_hi) || t > std::max(h_lo, h_hi)) return kNan;

  double y = std::clamp(y0, lo, hi);
  for (int iter = 0; iter < kM4MaxIter; ++iter) {
    const double hy = h(y);
    if (std::isnan(hy)) return m4_bisect(params, t, lo, hi);
    if ((hy < t) == increasing) {
      lo = y;
    } else {
      hi = y;
    }
    if (hi - lo < kM4Tol) break;
    const double slope = 1.0 / (y - params.eps_inf) + params.a / (params.eps0 - y);
    double next = y - (hy - t) / slope;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) < 0.5 * kM4Tol) return next;
    y = next;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

M4Forward::M4Forward(const M4Params& params) noexcept : params_(params) {
  const double width = params.eps0 - params.eps_inf;
  const double pad = 1e-12 * width;
  lo_ = params.eps_inf + pad;
  hi_ = params.eps0 - pad;
  if (!(lo_ < hi_)) return;
  const double h_lo = std::log(lo_ - params.eps_inf) -
                      params.a * std::log(params.eps0 - lo_);
  const double h_hi = std::log(hi_ - params.eps_inf) -
                      params.a * std::log(params.eps0 - hi_);
  if (std::isnan(h_lo) || std::isnan(h_hi)) return;
  // Solutions move monotonically as x grows; the direction is the h slope
  // composed with the sign of c (t = c ln x).
  dir_up_ = (h_lo < h_hi) == (params.c > 0.0);
  ok_ = true;
}

double M4Forward::operator()(double x) noexcept {
  if (!ok_) return kNan;
  double lo = lo_;
  double hi = hi_;
  if (have_prev_) {
    // Callers feed ascending x, so the previous solution bounds this one.
    if (dir_up_) {
      lo = std::max(lo, prev_ - 2.0 * kM4Tol);
    } else {
      hi = std::min(hi, prev_ + 2.0 * kM4Tol);
    }
  }
  const double y = m4_newton(params_, params_.c * std::log(x), lo, hi,
                             have_prev_ ? prev_ : 0.5 * (lo + hi));
  if (!std::isnan(y)) {
    prev_ = y;
    have_prev_ = true;
  }
  return y;
}

}  // namespace detail

double eval_bnsl(const BnslParams& params, double x) {
  check_positive_x(x);
  const double y = detail::eval_bnsl_raw(params, x);
  if (!std::isfinite(y)) {
    throw std::overflow_error("broken power law value overflows double at x = " +
                              std::to_string(x));
  }
  return y;
}

double eval_bnsl_log(const BnslParams& params, double z) {
  if (!(params.b > 0.0)) {
    throw std::invalid_argument("eval_bnsl_log requires b > 0");
  }
  return detail::eval_bnsl_log_raw(params, z);
}

const char* to_string(FormKind kind) {
  switch (kind) {
    case FormKind::m1: return "m1";
    case FormKind::m2: return "m2";
    case FormKind::m3: return "m3";
    case FormKind::m4: return "m4";
    case FormKind::bnsl: return "bnsl";
  }
  return "?";
}

FormKind form_kind_from_string(const std::string& name) {
  if (name == "m1") return FormKind::m1;
  if (name == "m2") return FormKind::m2;
  if (name == "m3") return FormKind::m3;
  if (name == "m4") return FormKind::m4;
  if (name == "bnsl") return FormKind::bnsl;
  throw std::invalid_argument("unknown functional form '" + name + "'");
}

FormKind FunctionalForm::kind() const {
  switch (value_.index()) {
    case 0: return FormKind::m1;
    case 1: return FormKind::m2;
    case 2: return FormKind::m3;
    case 3: return FormKind::m4;
    default: return FormKind::bnsl;
  }
}

double FunctionalForm::operator()(double x) const { return eval_form(*this, x); }

double eval_form(const FunctionalForm& form, double x) {
  check_positive_x(x);
  switch (form.kind()) {
    case FormKind::m1: {
      const M1Params& p = form.m1();
      return p.a * std::pow(x, p.b);
    }
    case FormKind::m2: {
      const M2Params& p = form.m2();
      return p.a * std::pow(x, p.b) + p.c;
    }
    case FormKind::m3: {
      const M3Params& p = form.m3();
      return p.a * std::pow(1.0 / x + p.d, -p.b) + p.c;
    }
    case FormKind::m4: {
      const M4Params& p = form.m4();
      if (!(p.eps_inf < p.eps0)) {
        throw std::invalid_argument("M4 requires eps_inf < eps0");
      }
      if (!(p.b > 0.0) || p.c == 0.0) {
        throw std::invalid_argument("M4 requires b > 0 and c != 0");
      }
      const double y = detail::eval_m4_raw(p, x);
      if (std::isnan(y)) {
        const double pad = 1e-12 * (p.eps0 - p.eps_inf);
        const double g_lo = m4_inverse(p, p.eps_inf + pad);
        const double g_hi = m4_inverse(p, p.eps0 - pad);
        throw NoSolutionError(x, std::min(g_lo, g_hi), std::max(g_lo, g_hi));
      }
      return y;
    }
    case FormKind::bnsl:
      return eval_bnsl(form.bnsl(), x);
  }
  throw std::logic_error("unreachable");
}

double m4_inverse(const M4Params& params, double y) {
  if (!(params.eps_inf < y && y < params.eps0)) {
    throw std::domain_error("m4_inverse requires eps_inf < y < eps0");
  }
  return std::pow((y - params.eps_inf) /
                      (params.b * std::pow(params.eps0 - y, params.a)),
                  1.0 / params.c);
}

Derivatives derivatives(const FunctionalForm& form, double x) {
  check_positive_x(x);
  switch (form.kind()) {
    case FormKind::m1:
    case FormKind::m2: {
      double a, b, c;
      if (form.kind() == FormKind::m1) {
        a = form.m1().a;
        b = form.m1().b;
        c = 0.0;
      } else {
        a = form.m2().a;
        b = form.m2().b;
        c = form.m2().c;
      }
      Derivatives out;
      out.f = a * std::pow(x, b) + c;
      out.df = a * b * std::pow(x, b - 1.0);
      out.d2f = a * b * (b - 1.0) * std::pow(x, b - 2.0);
      return out;
    }
    case FormKind::m3: {
      const M3Params& p = form.m3();
      Derivatives out;
      out.f = p.a * std::pow(1.0 / x + p.d, -p.b) + p.c;
      out.df = p.a * p.b /
               (x * (1.0 + p.d * x) * std::pow(p.d + 1.0 / x, p.b));
      out.d2f = p.a * p.b * std::pow(x, p.b - 2.0) *
                std::pow(1.0 + p.d * x, -2.0 - p.b) *
                (p.b - 1.0 - 2.0 * p.d * x);
      return out;
    }
    default:
      throw std::invalid_argument(
          "closed-form derivatives exist only for m1, m2, m3");
  }
}

double PowerLawSegment::eval(double x) const {
  return std::exp(std::log(coefficient) + exponent * std::log(x));
}

std::vector<PowerLawSegment> decompose(const BnslParams& params) {
  const int n = params.break_count();
  std::vector<PowerLawSegment> segments;
  segments.reserve(n + 1);

  double coefficient = params.b;
  double exponent = -params.c0;
  for (int k = 0; k <= n; ++k) {
    PowerLawSegment seg;
    seg.index = k + 1;
    seg.coefficient = coefficient;
    seg.exponent = exponent;
    seg.x_low = (k == 0) ? 0.0 : params.breaks[k - 1].d;
    seg.x_high = (k == n) ? kInf : params.breaks[k].d;
    segments.push_back(seg);

    if (k < n) {
      // Continuity at d_k: the next segment starts where this one ends.
      coefficient *= std::pow(params.breaks[k].d, params.breaks[k].c);
      exponent -= params.breaks[k].c;
    }
  }
  return segments;
}

}  // namespace bnsl
