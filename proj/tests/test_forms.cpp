// ============================================================================
// test_forms.cpp — broken power law and baseline form evaluation
// ============================================================================
//
// Covers:
// - eval_bnsl / eval_bnsl_log spot values, frozen high-precision instances,
//   and the overflow route for sharp breaks
// - M1..M4 evaluation, the two M4 inflection witness tuples, and the
//   bisection error contract
// - closed-form derivatives against central finite differences
// - power-law segment decomposition and its sharp-break asymptotics
// ============================================================================

#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "bnsl/errors.hpp"
#include "bnsl/forms.hpp"

using namespace bnsl;
using big_float = boost::multiprecision::cpp_bin_float_50;

namespace {

// Straight product-form evaluation in 50-digit arithmetic. Independent of the
// library's log-space path; used as the cross-check oracle.
double bnsl_reference(const BnslParams& p, double x) {
  big_float y = big_float(p.b) * pow(big_float(x), big_float(-p.c0));
  for (const Break& br : p.breaks) {
    const big_float t =
        1 + pow(big_float(x) / big_float(br.d), 1 / big_float(br.f));
    y *= pow(t, big_float(-br.c) * big_float(br.f));
  }
  return static_cast<double>(big_float(p.a) + y);
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace

// ============================================================================
// eval_bnsl
// ============================================================================

TEST_CASE("eval_bnsl: closed-form spot values") {
  // pure power law
  CHECK(eval_bnsl({0.0, 1.0, 1.0, {}}, 10.0) == doctest::Approx(0.1).epsilon(1e-14));
  // single break, factor (1 + 1)^{-1} at x = d
  CHECK(eval_bnsl({0.0, 1.0, 0.0, {{1.0, 4.0, 1.0}}}, 4.0) ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("eval_bnsl: frozen high-precision instance") {
  const BnslParams p{0.02, 2.0, 0.3, {{0.5, 100.0, 0.05}}};
  const double got = eval_bnsl(p, 1e4);
  // frozen from a 60-digit evaluation of the product form
  CHECK(rel_err(got, 0.0326191468896038649886872) < 1e-10);
  CHECK(rel_err(got, bnsl_reference(p, 1e4)) < 1e-10);
}

TEST_CASE("eval_bnsl: domain errors") {
  CHECK_THROWS_AS(eval_bnsl({0.0, 1.0, 1.0, {}}, 0.0), std::domain_error);
  CHECK_THROWS_AS(eval_bnsl({0.0, 1.0, 1.0, {}}, -2.0), std::domain_error);
}

TEST_CASE("eval_bnsl: sharp breaks route through log space") {
  // (x/d)^{1/f} = 10^2000 overflows any double; the value must still come out
  // finite and agree with extended-precision arithmetic.
  const BnslParams p{0.0, 1.0, 0.2, {{0.7, 100.0, 1e-3}}};
  for (double x : {1e4, 1e5, 1e6}) {
    const double got = eval_bnsl(p, x);
    CHECK(std::isfinite(got));
    CHECK(rel_err(got, bnsl_reference(p, x)) < 1e-10);
  }
}

TEST_CASE("eval_bnsl: zero slope change removes the break exactly") {
  const BnslParams with{0.1, 2.0, 0.4, {{0.0, 50.0, 0.2}, {0.8, 500.0, 0.3}}};
  const BnslParams without{0.1, 2.0, 0.4, {{0.8, 500.0, 0.3}}};
  for (double x : {0.5, 3.0, 50.0, 777.0, 1e5})
    CHECK(eval_bnsl(with, x) == eval_bnsl(without, x));
}

TEST_CASE("eval_bnsl: no breaks reduces to a + b x^-c0 exactly") {
  const BnslParams p{0.25, 1.75, 0.6, {}};
  for (double x : {0.1, 1.0, 42.0, 1e6})
    CHECK(eval_bnsl(p, x) == p.a + p.b * std::pow(x, -p.c0));
}

// ============================================================================
// eval_bnsl_log
// ============================================================================

TEST_CASE("eval_bnsl_log: spot values") {
  CHECK(eval_bnsl_log({0.0, 1.0, 1.0, {}}, std::log(10.0)) ==
        doctest::Approx(-std::log(10.0)).epsilon(1e-14));
  // softplus(0) = ln 2 scaled by c f = 1
  CHECK(eval_bnsl_log({0.0, 1.0, 0.0, {{1.0, 4.0, 1.0}}}, std::log(4.0)) ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("eval_bnsl_log agrees with the linear path") {
  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> ua(0.0, 1.0);
  std::uniform_real_distribution<double> uc(-1.5, 2.5);
  std::uniform_real_distribution<double> uz(-6.0, 6.0);
  for (int i = 0; i < 300; ++i) {
    BnslParams p;
    p.a = ua(rng);
    p.b = std::exp(uz(rng) * 0.5);
    p.c0 = std::abs(uc(rng));
    const int n = i % 3;
    double d = std::exp(ua(rng) * 2.0);
    for (int k = 0; k < n; ++k) {
      // include sharpness down to 1e-3
      const double f = std::pow(10.0, -3.0 * ua(rng));
      p.breaks.push_back({uc(rng), d, f});
      d *= 10.0 * (1.0 + ua(rng));
    }
    const double z = uz(rng);
    const double lin = eval_bnsl(p, std::exp(z));
    const double log_path = p.a + std::exp(eval_bnsl_log(p, z));
    CHECK(rel_err(log_path, lin) < 1e-10);
  }
}

TEST_CASE("softplus: overflow-safe branch") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(1000.0) == 1000.0);              // u branch
  CHECK(softplus(-745.0) == doctest::Approx(0.0).epsilon(1e-300));
}

// ============================================================================
// eval_form: M1..M4
// ============================================================================

TEST_CASE("eval_form: baseline spot values") {
  CHECK(eval_form(M1Params{2.0, 0.5}, 4.0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(eval_form(M2Params{1.0, 1.0, 5.0}, 7.0) == doctest::Approx(12.0));
  // M3: a (x^{-1} + d)^{-b} + c with b = -1 is a (x^{-1} + d) + c
  CHECK(eval_form(M3Params{1.0, -1.0, 0.0, 1.0}, 2.0) ==
        doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("eval_form: M4 inflection witnesses") {
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  CHECK(std::abs(eval_form(M4Params{1.0, 1.0, -2.0, 0.75, 0.25}, inv_sqrt3) -
                 0.625) < 1e-9);
  const double x2 = std::cbrt(std::sqrt(3.0) / 2.0 - 5.0 / 6.0);
  CHECK(std::abs(eval_form(M4Params{2.0, 1.0, -3.0, 2.0 / 3.0, 1.0 / 3.0}, x2) -
                 inv_sqrt3) < 1e-9);
}

TEST_CASE("eval_form: M4 curvature changes sign at the witness") {
  const M4Params p{1.0, 1.0, -2.0, 0.75, 0.25};
  const double xw = 1.0 / std::sqrt(3.0);
  auto second_diff = [&](double x) {
    const double h = 0.05 * x;
    return eval_form(p, x + h) - 2.0 * eval_form(p, x) + eval_form(p, x - h);
  };
  CHECK(second_diff(0.6 * xw) * second_diff(1.6 * xw) < 0.0);
}

TEST_CASE("eval_form: M4 out-of-range x reports the attained bracket") {
  const M4Params p{1.0, 1.0, 1.0, 1.0, 0.0};  // g(y) = y / (1 - y), range (0, inf)
  try {
    eval_form(p, 1e60);
    FAIL("expected NoSolutionError");
  } catch (const NoSolutionError& e) {
    CHECK(e.x() == 1e60);
    CHECK(e.bracket_lo() < e.bracket_hi());
  }
}

TEST_CASE("eval_form: domain errors on nonpositive x") {
  CHECK_THROWS_AS(eval_form(M1Params{1.0, 1.0}, 0.0), std::domain_error);
  CHECK_THROWS_AS(eval_form(M4Params{}, -1.0), std::domain_error);
}

TEST_CASE("m4_inverse: closed form and round trips") {
  CHECK(m4_inverse(M4Params{1.0, 1.0, -2.0, 0.75, 0.25}, 0.625) ==
        doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(m4_inverse(M4Params{1.0, 1.0, 1.0, 1.0, 0.0}, 0.5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(m4_inverse(M4Params{1.0, 1.0, 1.0, 1.0, 0.0}, 1.5),
                  std::domain_error);

  // forward(inverse(y)) = y across the open interval
  const M4Params p{1.3, 0.8, -1.7, 0.9, 0.2};
  for (double t : {0.05, 0.3, 0.5, 0.7, 0.95}) {
    const double y = p.eps_inf + t * (p.eps0 - p.eps_inf);
    const double x = m4_inverse(p, y);
    CHECK(std::abs(eval_form(p, x) - y) < 1e-9);
  }
}

// ============================================================================
// derivatives
// ============================================================================

TEST_CASE("derivatives: polynomial spot values") {
  const Derivatives d1 = derivatives(M1Params{1.0, 2.0}, 3.0);
  CHECK(d1.f == doctest::Approx(9.0));
  CHECK(d1.df == doctest::Approx(6.0));
  CHECK(d1.d2f == doctest::Approx(2.0));

  const Derivatives d2 = derivatives(M2Params{1.0, 1.0, 5.0}, 7.0);
  CHECK(d2.f == doctest::Approx(12.0));
  CHECK(d2.df == doctest::Approx(1.0));
  CHECK(d2.d2f == doctest::Approx(0.0));
}

TEST_CASE("derivatives: M3 closed form matches finite differences") {
  // high-precision central differences; a double-precision step cannot
  // resolve the second derivative to 1e-6 relative
  for (const M3Params p : {M3Params{1.0, -1.0, 0.0, 1.0},
                           M3Params{0.7, -1.7, 0.3, 2.5}}) {
    const auto mp_f = [&](const big_float& x) {
      return big_float(p.a) * pow(1 / x + big_float(p.d), big_float(-p.b)) + big_float(p.c);
    };
    const FunctionalForm form{p};
    for (double x : {0.3, 1.0, 2.0, 9.0}) {
      const Derivatives d = derivatives(form, x);
      const big_float h = big_float(x) * 1e-12;
      const big_float fp = mp_f(big_float(x) + h), fm = mp_f(big_float(x) - h);
      const double fd1 = double((fp - fm) / (2 * h));
      const double fd2 = double((fp - 2 * mp_f(big_float(x)) + fm) / (h * h));
      CHECK(rel_err(d.df, fd1) < 1e-9);
      CHECK(rel_err(d.d2f, fd2) < 1e-9);
    }
  }
}

TEST_CASE("derivatives: domain error on nonpositive x") {
  CHECK_THROWS_AS(derivatives(M1Params{1.0, 2.0}, 0.0), std::domain_error);
}

TEST_CASE("M1-M3 stay monotone without inflection (sampled)") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(0.1, 5.0);
  std::uniform_real_distribution<double> ub(0.1, 2.5);
  std::uniform_real_distribution<double> sign01(0.0, 1.0);
  const int kDraws = 100, kGrid = 60;
  for (int kind = 0; kind < 3; ++kind) {
    for (int draw = 0; draw < kDraws; ++draw) {
      FunctionalForm form;
      if (kind == 0) {
        form = M1Params{ua(rng), sign01(rng) < 0.5 ? ub(rng) : -ub(rng)};
      } else if (kind == 1) {
        form = M2Params{ua(rng), sign01(rng) < 0.5 ? ub(rng) : -ub(rng), ua(rng)};
      } else {
        form = M3Params{ua(rng), -ub(rng), ua(rng), ua(rng)};
      }
      std::vector<double> ys(kGrid);
      for (int i = 0; i < kGrid; ++i) {
        const double x = std::pow(10.0, -3.0 + 6.0 * i / (kGrid - 1));
        ys[i] = eval_form(form, x);
      }
      int dir = 0, bad = 0;
      for (int i = 1; i < kGrid; ++i) {
        const double diff = ys[i] - ys[i - 1];
        if (diff == 0.0) continue;
        const int s = diff > 0 ? 1 : -1;
        if (dir == 0) dir = s;
        else if (s != dir) ++bad;
      }
      CHECK(bad == 0);
    }
  }
}

// ============================================================================
// decompose
// ============================================================================

TEST_CASE("decompose: no breaks gives the power law itself") {
  const BnslParams p{0.0, 2.5, 0.7, {}};
  const auto segs = decompose(p);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].index == 1);
  CHECK(segs[0].coefficient == doctest::Approx(2.5));
  CHECK(segs[0].exponent == doctest::Approx(-0.7));
  CHECK(segs[0].x_low == 0.0);
  CHECK(std::isinf(segs[0].x_high));
  for (double x : {0.2, 1.0, 1e3})
    CHECK(segs[0].eval(x) == doctest::Approx(2.5 * std::pow(x, -0.7)));
}

TEST_CASE("decompose: sharp single break matches the far segment") {
  const BnslParams p{0.0, 1.0, 0.0, {{1.0, 10.0, 0.001}}};
  const auto segs = decompose(p);
  REQUIRE(segs.size() == 2);
  // continuity at d = 10 pins the second prefactor: 1 * 10^0 = C * 10^{-1}
  CHECK(segs[1].coefficient == doctest::Approx(10.0));
  CHECK(segs[1].exponent == doctest::Approx(-1.0));
  const double x = 1000.0;
  CHECK(rel_err(eval_bnsl(p, x) - p.a, segs[1].eval(x)) < 1e-2);
}

TEST_CASE("decompose: adjacent segments agree at each break") {
  const BnslParams p{0.3, 2.0, 0.2,
                     {{0.6, 20.0, 0.25}, {-0.4, 300.0, 0.1}, {1.1, 5000.0, 0.3}}};
  const auto segs = decompose(p);
  REQUIRE(segs.size() == 4);
  for (std::size_t k = 0; k + 1 < segs.size(); ++k) {
    const double d = p.breaks[k].d;
    CHECK(rel_err(segs[k].eval(d), segs[k + 1].eval(d)) < 1e-12);
    CHECK(segs[k].x_high == doctest::Approx(d));
    CHECK(segs[k + 1].x_low == doctest::Approx(d));
  }
}

TEST_CASE("decompose: asymptotic accuracy three decades out") {
  const BnslParams p{0.0, 1.5, 0.25, {{0.8, 50.0, 0.01}}};
  const auto segs = decompose(p);
  REQUIRE(segs.size() == 2);
  const double lo = 50.0 * 1e-3, hi = 50.0 * 1e3;
  CHECK(rel_err(eval_bnsl(p, lo) - p.a, segs[0].eval(lo)) < 1e-2);
  CHECK(rel_err(eval_bnsl(p, hi) - p.a, segs[1].eval(hi)) < 1e-2);
}

// ============================================================================
// validation
// ============================================================================

TEST_CASE("validate: rejects malformed break lists") {
  BnslParams p{0.0, 1.0, 0.5, {{1.0, 10.0, 0.1}}};
  CHECK_NOTHROW(validate(p));
  p.breaks[0].d = -1.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p.breaks[0].d = 10.0;
  p.breaks[0].f = 0.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p.breaks[0].f = 0.1;
  p.breaks.push_back({0.5, 5.0, 0.1});  // out of order
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}
