#pragma once

#include <nlohmann/json.hpp>

#include "bnsl/fitting.hpp"
#include "bnsl/forms.hpp"

namespace bnsl {

// Non-finite doubles have no JSON literal; they round-trip as null.
nlohmann::json json_number(double v);
double number_from(const nlohmann::json& j);

void to_json(nlohmann::json& j, const Break& v);
void from_json(const nlohmann::json& j, Break& v);

void to_json(nlohmann::json& j, const BnslParams& v);
void from_json(const nlohmann::json& j, BnslParams& v);

void to_json(nlohmann::json& j, const M1Params& v);
void from_json(const nlohmann::json& j, M1Params& v);
void to_json(nlohmann::json& j, const M2Params& v);
void from_json(const nlohmann::json& j, M2Params& v);
void to_json(nlohmann::json& j, const M3Params& v);
void from_json(const nlohmann::json& j, M3Params& v);
void to_json(nlohmann::json& j, const M4Params& v);
void from_json(const nlohmann::json& j, M4Params& v);

/// {"kind": "bnsl", "params": {...}}
void to_json(nlohmann::json& j, const FunctionalForm& v);
void from_json(const nlohmann::json& j, FunctionalForm& v);

void to_json(nlohmann::json& j, const PowerLawSegment& v);
void from_json(const nlohmann::json& j, PowerLawSegment& v);

// Config objects accept partial JSON; absent keys keep their defaults.
void to_json(nlohmann::json& j, const GridSpec& v);
void from_json(const nlohmann::json& j, GridSpec& v);
void to_json(nlohmann::json& j, const FitBounds& v);
void from_json(const nlohmann::json& j, FitBounds& v);
void to_json(nlohmann::json& j, const FitConfig& v);
void from_json(const nlohmann::json& j, FitConfig& v);

void to_json(nlohmann::json& j, const FitResult& v);

/// Canonical text encoding used everywhere a report is written: sorted
/// keys, two-space indent, trailing newline. Byte-identical for equal
/// documents.
std::string dump_report(const nlohmann::json& j);

}  // namespace bnsl
