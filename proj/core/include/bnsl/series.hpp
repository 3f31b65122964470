#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bnsl/errors.hpp"

namespace bnsl {

enum class Split { train, test };

struct SeriesPoint {
  double x = 0.0;
  double y = 0.0;
  Split split = Split::train;
};

/// An ordered scaling curve with an extrapolation split: every test point
/// lies at or beyond the largest train x.
struct DataSeries {
  std::string task_name;
  std::string domain_tag;
  std::vector<SeriesPoint> points;

  std::vector<SeriesPoint> train_points() const;
  std::vector<SeriesPoint> test_points() const;
};

/// Reads the `x,y,split` CSV format: decimal floats, split is `train` or
/// `test`, lines starting with `#` are comments. Checks only syntax and
/// positivity; throws DataError with the offending line number.
DataSeries parse_series_csv(const std::filesystem::path& path);

/// Enforces the series invariants: points sorted ascending by x, at least
/// 2 train and 1 test point, and every test x >= every train x. Throws
/// DataError naming the violated rule.
void validate_series(const DataSeries& series);

/// parse_series_csv followed by validate_series.
DataSeries load_series(const std::filesystem::path& path);

struct ManifestEntry {
  std::string name;
  std::string domain;
  std::filesystem::path path;  ///< resolved relative to the manifest file
};

/// Reads `{ "tasks": [ { "name", "domain", "path" } ] }`.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace bnsl
