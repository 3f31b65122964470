#include "bnsl/json_io.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bnsl {

using nlohmann::json;

json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

double number_from(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

void to_json(json& j, const Break& v) { j = json{{"c", v.c}, {"d", v.d}, {"f", v.f}}; }

void from_json(const json& j, Break& v) {
  j.at("c").get_to(v.c);
  j.at("d").get_to(v.d);
  j.at("f").get_to(v.f);
}

void to_json(json& j, const BnslParams& v) {
  j = json{{"a", v.a}, {"b", v.b}, {"c0", v.c0}, {"breaks", v.breaks}};
}

void from_json(const json& j, BnslParams& v) {
  j.at("a").get_to(v.a);
  j.at("b").get_to(v.b);
  j.at("c0").get_to(v.c0);
  v.breaks.clear();
  if (j.contains("breaks")) j.at("breaks").get_to(v.breaks);
}

void to_json(json& j, const M1Params& v) { j = json{{"a", v.a}, {"b", v.b}}; }
void from_json(const json& j, M1Params& v) {
  j.at("a").get_to(v.a);
  j.at("b").get_to(v.b);
}

void to_json(json& j, const M2Params& v) {
  j = json{{"a", v.a}, {"b", v.b}, {"c", v.c}};
}
void from_json(const json& j, M2Params& v) {
  j.at("a").get_to(v.a);
  j.at("b").get_to(v.b);
  j.at("c").get_to(v.c);
}

void to_json(json& j, const M3Params& v) {
  j = json{{"a", v.a}, {"b", v.b}, {"c", v.c}, {"d", v.d}};
}
void from_json(const json& j, M3Params& v) {
  j.at("a").get_to(v.a);
  j.at("b").get_to(v.b);
  j.at("c").get_to(v.c);
  j.at("d").get_to(v.d);
}

void to_json(json& j, const M4Params& v) {
  j = json{{"a", v.a}, {"b", v.b}, {"c", v.c}, {"eps0", v.eps0},
           {"epsInf", v.eps_inf}};
}
void from_json(const json& j, M4Params& v) {
  j.at("a").get_to(v.a);
  j.at("b").get_to(v.b);
  j.at("c").get_to(v.c);
  j.at("eps0").get_to(v.eps0);
  j.at("epsInf").get_to(v.eps_inf);
}

void to_json(json& j, const FunctionalForm& v) {
  json params;
  switch (v.kind()) {
    case FormKind::m1: params = v.m1(); break;
    case FormKind::m2: params = v.m2(); break;
    case FormKind::m3: params = v.m3(); break;
    case FormKind::m4: params = v.m4(); break;
    case FormKind::bnsl: params = v.bnsl(); break;
  }
  j = json{{"kind", to_string(v.kind())}, {"params", std::move(params)}};
}

void from_json(const json& j, FunctionalForm& v) {
  const FormKind kind = form_kind_from_string(j.at("kind").get<std::string>());
  const json& p = j.at("params");
  switch (kind) {
    case FormKind::m1: v = FunctionalForm(p.get<M1Params>()); return;
    case FormKind::m2: v = FunctionalForm(p.get<M2Params>()); return;
    case FormKind::m3: v = FunctionalForm(p.get<M3Params>()); return;
    case FormKind::m4: v = FunctionalForm(p.get<M4Params>()); return;
    case FormKind::bnsl: v = FunctionalForm(p.get<BnslParams>()); return;
  }
  throw std::invalid_argument("unknown form kind in JSON");
}

void to_json(json& j, const PowerLawSegment& v) {
  j = json{{"index", v.index},
           {"coefficient", v.coefficient},
           {"exponent", v.exponent},
           {"xLow", json_number(v.x_low)},
           {"xHigh", json_number(v.x_high)}};
}

void from_json(const json& j, PowerLawSegment& v) {
  j.at("index").get_to(v.index);
  j.at("coefficient").get_to(v.coefficient);
  j.at("exponent").get_to(v.exponent);
  v.x_low = number_from(j.at("xLow"));
  v.x_high = number_from(j.at("xHigh"));
}

void to_json(json& j, const GridSpec& v) {
  j = json{{"gLow", v.g_low},     {"gHigh", v.g_high}, {"gPoints", v.g_points},
           {"cLow", v.c_low},     {"cHigh", v.c_high}, {"fLow", v.f_low},
           {"fHigh", v.f_high},   {"maxNodes", v.max_nodes}};
}

void from_json(const json& j, GridSpec& v) {
  v.g_low = j.value("gLow", v.g_low);
  v.g_high = j.value("gHigh", v.g_high);
  v.g_points = j.value("gPoints", v.g_points);
  v.c_low = j.value("cLow", v.c_low);
  v.c_high = j.value("cHigh", v.c_high);
  v.f_low = j.value("fLow", v.f_low);
  v.f_high = j.value("fHigh", v.f_high);
  v.max_nodes = j.value("maxNodes", v.max_nodes);
}

void to_json(json& j, const FitBounds& v) {
  j = json{{"aMin", v.a_min},
           {"allowNegativeA", v.allow_negative_a},
           {"fMin", v.f_min},
           {"fMax", v.f_max}};
}

void from_json(const json& j, FitBounds& v) {
  v.a_min = j.value("aMin", v.a_min);
  v.allow_negative_a = j.value("allowNegativeA", v.allow_negative_a);
  v.f_min = j.value("fMin", v.f_min);
  v.f_max = j.value("fMax", v.f_max);
}

void to_json(json& j, const FitConfig& v) {
  j = json{{"gridSpec", v.grid},
           {"refineTolerance", v.refine_tolerance},
           {"maxRefineIters", v.max_refine_iters},
           {"multiStart", v.multi_start},
           {"bounds", v.bounds},
           {"seed", v.seed}};
}

void from_json(const json& j, FitConfig& v) {
  if (j.contains("gridSpec")) j.at("gridSpec").get_to(v.grid);
  v.refine_tolerance = j.value("refineTolerance", v.refine_tolerance);
  v.max_refine_iters = j.value("maxRefineIters", v.max_refine_iters);
  v.multi_start = j.value("multiStart", v.multi_start);
  if (j.contains("bounds")) j.at("bounds").get_to(v.bounds);
  v.seed = j.value("seed", v.seed);
}

void to_json(json& j, const FitResult& v) {
  j = json{{"form", v.form},
           {"trainLoss", v.train_loss},
           {"startLoss", v.start_loss},
           {"converged", v.converged},
           {"iterations", v.iterations}};
}

std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

}  // namespace bnsl
