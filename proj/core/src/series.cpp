#include "bnsl/series.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bnsl {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

double parse_double(const std::string& field, const std::filesystem::path& path,
                    int line_no, const char* what) {
  const std::string value = trim(field);
  double out = 0.0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw DataError(path.string() + ":" + std::to_string(line_no) +
                    ": cannot parse " + what + " value '" + value + "'");
  }
  return out;
}

}  // namespace

std::vector<SeriesPoint> DataSeries::train_points() const {
  std::vector<SeriesPoint> out;
  for (const SeriesPoint& p : points) {
    if (p.split == Split::train) out.push_back(p);
  }
  return out;
}

std::vector<SeriesPoint> DataSeries::test_points() const {
  std::vector<SeriesPoint> out;
  for (const SeriesPoint& p : points) {
    if (p.split == Split::test) out.push_back(p);
  }
  return out;
}

DataSeries parse_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }

  DataSeries series;
  series.task_name = path.stem().string();

  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    if (!header_seen) {
      // Require the documented header so column order mistakes fail loudly.
      std::string lowered = stripped;
      std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      lowered.erase(std::remove_if(lowered.begin(), lowered.end(),
                                   [](unsigned char ch) { return std::isspace(ch); }),
                    lowered.end());
      if (lowered != "x,y,split") {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": expected header 'x,y,split', got '" + stripped + "'");
      }
      header_seen = true;
      continue;
    }

    std::istringstream fields(stripped);
    std::string x_field, y_field, split_field;
    if (!std::getline(fields, x_field, ',') ||
        !std::getline(fields, y_field, ',') ||
        !std::getline(fields, split_field)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 3 comma-separated fields");
    }

    SeriesPoint point;
    point.x = parse_double(x_field, path, line_no, "x");
    point.y = parse_double(y_field, path, line_no, "y");
    const std::string split = trim(split_field);
    if (split == "train") {
      point.split = Split::train;
    } else if (split == "test") {
      point.split = Split::test;
    } else {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": split must be 'train' or 'test', got '" + split + "'");
    }

    if (!(point.x > 0.0) || !std::isfinite(point.x)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": x must be positive and finite");
    }
    if (!(point.y > 0.0) || !std::isfinite(point.y)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": y must be positive and finite");
    }
    series.points.push_back(point);
  }

  if (!header_seen) {
    throw DataError(path.string() + ": missing 'x,y,split' header");
  }
  return series;
}

void validate_series(const DataSeries& series) {
  const std::string name =
      series.task_name.empty() ? "series" : series.task_name;

  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double prev_x = 0.0;
  double max_train_x = 0.0;
  for (const SeriesPoint& p : series.points) {
    if (p.x < prev_x) {
      throw DataError(name + ": points must be sorted ascending by x");
    }
    prev_x = p.x;
    if (p.split == Split::train) {
      ++train_count;
      max_train_x = std::max(max_train_x, p.x);
    } else {
      ++test_count;
    }
  }
  if (train_count < 2) {
    throw DataError(name + ": need at least 2 train points, have " +
                    std::to_string(train_count));
  }
  if (test_count < 1) {
    throw DataError(name + ": need at least 1 test point");
  }
  for (const SeriesPoint& p : series.points) {
    if (p.split == Split::test && p.x < max_train_x) {
      throw DataError(name + ": test point x = " + std::to_string(p.x) +
                      " lies below the largest train x = " +
                      std::to_string(max_train_x) +
                      " (extrapolation split required)");
    }
  }
}

DataSeries load_series(const std::filesystem::path& path) {
  DataSeries series = parse_series_csv(path);
  validate_series(series);
  return series;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open manifest '" + path.string() + "'");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("tasks") || !doc["tasks"].is_array()) {
    throw DataError("manifest '" + path.string() +
                    "' must be an object with a 'tasks' array");
  }

  std::vector<ManifestEntry> entries;
  for (const auto& task : doc["tasks"]) {
    try {
      ManifestEntry entry;
      entry.name = task.at("name").get<std::string>();
      entry.domain = task.at("domain").get<std::string>();
      std::filesystem::path p = task.at("path").get<std::string>();
      if (p.is_relative()) p = path.parent_path() / p;
      entry.path = p;
      entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest '" + path.string() + "': bad task entry: " +
                      e.what());
    }
  }
  if (entries.empty()) {
    throw DataError("manifest '" + path.string() + "' lists no tasks");
  }
  return entries;
}

}  // namespace bnsl
