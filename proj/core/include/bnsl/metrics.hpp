#pragma once

#include <span>

namespace bnsl {

/// An observed metric value and the corresponding model prediction.
struct PredictionPair {
  double y = 0.0;     ///< observed
  double yhat = 0.0;  ///< predicted
};

/// Root mean squared log error: sqrt(sum_i (ln y_i - ln yhat_i)^2 / N).
/// Throws std::domain_error on an empty list or nonpositive entries.
double rmsle(std::span<const PredictionPair> pairs);

/// The uncertainty companion of rmsle. With error_i = (ln y_i - ln yhat_i)^2,
/// mu its mean and sigma its sample standard deviation (divisor N-1):
///
///   sqrt(mu + sigma / sqrt(N)) - sqrt(mu)
///
/// Returns 0 for a single pair, where the sample deviation is undefined.
double root_standard_log_error(std::span<const PredictionPair> pairs);

/// Numerically stable mean squared log error, the fitting loss:
/// sum_i (ln(y_i + 1) - ln(yhat_i + 1))^2 / N. Entries must be > -1.
double stable_msle(std::span<const PredictionPair> pairs);

}  // namespace bnsl
