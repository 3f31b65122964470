#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "bnsl/errors.hpp"

namespace bnsl {

/// One smooth transition between two adjacent power-law segments on a
/// log-log plot.
struct Break {
  double c = 0.0;  ///< slope change across the break
  double d = 1.0;  ///< x location of the break, > 0
  double f = 1.0;  ///< sharpness, > 0; smaller values give a sharper break
};

/// Constants of a smoothly broken power law
///
///   y = a + b x^{-c0} * prod_i (1 + (x/d_i)^{1/f_i})^{-c_i f_i}
///
/// With no breaks this reduces to y = a + b x^{-c0}. c0 = 0 encodes a
/// random-guessing plateau at height a + b.
struct BnslParams {
  double a = 0.0;   ///< asymptotic metric value as x -> infinity
  double b = 1.0;   ///< offset on a log-log plot
  double c0 = 0.0;  ///< slope of the first approximately linear region
  std::vector<Break> breaks;

  int break_count() const { return static_cast<int>(breaks.size()); }
};

/// Throws std::invalid_argument unless d_i, f_i are positive and finite and
/// the breaks are sorted strictly ascending by d.
void validate(const BnslParams& params);

/// Direct evaluation of the broken power law. Switches to the log-space
/// path automatically when a sharp break would overflow the linear-space
/// product. Throws std::domain_error on x <= 0 and std::overflow_error when
/// even the log-space value exceeds double range.
double eval_bnsl(const BnslParams& params, double x);

/// ln(y - a) as a function of z = ln x:
///
///   ln b - c0 z - sum_i c_i f_i softplus((z - ln d_i) / f_i)
///
/// Requires b > 0 (throws std::invalid_argument otherwise).
double eval_bnsl_log(const BnslParams& params, double z);

/// Overflow-safe ln(1 + exp(u)).
double softplus(double u);

// The four baseline scaling-law families. Parameter letters follow the
// published definitions of each form.
struct M1Params {
  double a = 1.0, b = 0.0;  ///< y = a x^b
};
struct M2Params {
  double a = 1.0, b = 0.0, c = 0.0;  ///< y = a x^b + c
};
struct M3Params {
  double a = 1.0, b = -1.0, c = 0.0, d = 1.0;  ///< y = a (x^{-1} + d)^{-b} + c, valid for b < 0, d > 0
};
/// Defined through its inverse map x = g(y) = ((y - eps_inf) / (b (eps0 - y)^a))^{1/c},
/// monotone on (eps_inf, eps0). Requires eps_inf < eps0, b > 0, c != 0.
struct M4Params {
  double a = 1.0, b = 1.0, c = 1.0;
  double eps0 = 1.0;     ///< random-guess performance (upper end of y)
  double eps_inf = 0.0;  ///< irreducible error (lower end of y)
};

enum class FormKind { m1, m2, m3, m4, bnsl };

const char* to_string(FormKind kind);
FormKind form_kind_from_string(const std::string& name);

/// Tagged union over the five functional forms.
class FunctionalForm {
 public:
  FunctionalForm() : value_(M1Params{}) {}
  FunctionalForm(M1Params p) : value_(p) {}
  FunctionalForm(M2Params p) : value_(p) {}
  FunctionalForm(M3Params p) : value_(p) {}
  FunctionalForm(M4Params p) : value_(p) {}
  FunctionalForm(BnslParams p) : value_(std::move(p)) {}

  FormKind kind() const;

  const M1Params& m1() const { return std::get<M1Params>(value_); }
  const M2Params& m2() const { return std::get<M2Params>(value_); }
  const M3Params& m3() const { return std::get<M3Params>(value_); }
  const M4Params& m4() const { return std::get<M4Params>(value_); }
  const BnslParams& bnsl() const { return std::get<BnslParams>(value_); }

  /// Shorthand for eval_form(*this, x).
  double operator()(double x) const;

 private:
  std::variant<M1Params, M2Params, M3Params, M4Params, BnslParams> value_;
};

/// Evaluates any form at x > 0. M4 is inverted numerically by bisection on
/// its monotone inverse map; throws NoSolutionError when x lies outside the
/// attained range.
double eval_form(const FunctionalForm& form, double x);

/// Closed-form inverse map of M4: x = ((y - eps_inf) / (b (eps0 - y)^a))^{1/c}.
/// Throws std::domain_error unless eps_inf < y < eps0.
double m4_inverse(const M4Params& params, double y);

struct Derivatives {
  double f = 0.0;    ///< f(x)
  double df = 0.0;   ///< f'(x)
  double d2f = 0.0;  ///< f''(x)
};

/// Closed-form first and second derivatives of M1, M2, M3. Throws
/// std::invalid_argument for other kinds and std::domain_error on x <= 0.
Derivatives derivatives(const FunctionalForm& form, double x);

/// One of the n+1 power laws a broken power law interpolates between:
/// value(x) = coefficient * x^exponent on roughly [x_low, x_high].
struct PowerLawSegment {
  int index = 1;             ///< 1-based segment number
  double coefficient = 1.0;  ///< > 0
  double exponent = 0.0;     ///< -(c0 + c1 + ... + c_{k-1})
  double x_low = 0.0;        ///< region hint; 0 for the first segment
  double x_high = 0.0;       ///< region hint; +infinity for the last segment

  /// coefficient * x^exponent, computed in log space so extreme exponents
  /// do not overflow prematurely.
  double eval(double x) const;
};

/// Splits a broken power law into its n+1 asymptotic power-law segments.
/// Adjacent segments agree exactly at each break location. The segments
/// approximate eval_bnsl(x) - a when the sharpness values are small.
std::vector<PowerLawSegment> decompose(const BnslParams& params);

namespace detail {

// Non-throwing evaluation used by the fitting hot path. May return a
// non-finite value instead of raising.
double eval_bnsl_raw(const BnslParams& params, double x) noexcept;
double eval_bnsl_log_raw(const BnslParams& params, double z) noexcept;

// Non-throwing M4 forward evaluation; NaN when no solution exists.
double eval_m4_raw(const M4Params& params, double x) noexcept;

// Forward evaluation over an ascending sequence of x values: each solved y
// narrows the bisection bracket for the next call. Same results as
// eval_m4_raw within the bisection tolerance.
class M4Forward {
 public:
  explicit M4Forward(const M4Params& params) noexcept;
  double operator()(double x) noexcept;

 private:
  M4Params params_;
  double lo_ = 0.0, hi_ = 0.0, prev_ = 0.0;
  bool dir_up_ = true, have_prev_ = false, ok_ = false;
};

}  // namespace detail

}  // namespace bnsl
