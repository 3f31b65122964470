#include "bnsl/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bnsl {

namespace {

void require_nonempty(std::span<const PredictionPair> pairs) {
  if (pairs.empty()) {
    throw std::domain_error("metric requires at least one prediction pair");
  }
}

}  // namespace

double rmsle(std::span<const PredictionPair> pairs) {
  require_nonempty(pairs);
  double sum = 0.0;
  for (const PredictionPair& p : pairs) {
    if (!(p.y > 0.0) || !(p.yhat > 0.0)) {
      throw std::domain_error("rmsle requires strictly positive values");
    }
    const double e = std::log(p.y) - std::log(p.yhat);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

double root_standard_log_error(std::span<const PredictionPair> pairs) {
  require_nonempty(pairs);
  const std::size_t n = pairs.size();
  if (n == 1) {
    if (!(pairs[0].y > 0.0) || !(pairs[0].yhat > 0.0)) {
      throw std::domain_error("root_standard_log_error requires strictly positive values");
    }
    return 0.0;  // sample deviation undefined for a single pair
  }

  double mean = 0.0;
  for (const PredictionPair& p : pairs) {
    if (!(p.y > 0.0) || !(p.yhat > 0.0)) {
      throw std::domain_error("root_standard_log_error requires strictly positive values");
    }
    const double e = std::log(p.y) - std::log(p.yhat);
    mean += e * e;
  }
  mean /= static_cast<double>(n);

  double var = 0.0;
  for (const PredictionPair& p : pairs) {
    const double e = std::log(p.y) - std::log(p.yhat);
    const double dev = e * e - mean;
    var += dev * dev;
  }
  const double sigma = std::sqrt(var / static_cast<double>(n - 1));
  return std::sqrt(mean + sigma / std::sqrt(static_cast<double>(n))) -
         std::sqrt(mean);
}

double stable_msle(std::span<const PredictionPair> pairs) {
  require_nonempty(pairs);
  double sum = 0.0;
  for (const PredictionPair& p : pairs) {
    if (!(p.y > -1.0) || !(p.yhat > -1.0)) {
      throw std::domain_error("stable_msle requires values > -1");
    }
    const double e = std::log1p(p.y) - std::log1p(p.yhat);
    sum += e * e;
  }
  return sum / static_cast<double>(pairs.size());
}

}  // namespace bnsl
