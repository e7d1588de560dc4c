#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

#include "drcast/series.hpp"

namespace drcast {

inline constexpr int kLagHours = 5;
inline constexpr int kBaseCovariateDim = 2 * kLagHours + 24;           // 34
inline constexpr int kLatentCovariateDim = kBaseCovariateDim + 24;     // 58

// Covariates for predicting hour t: five consumption lags and five
// temperature lags (most recent first), a one-hot hour of day, and — when a
// latent label is supplied — the hour one-hot multiplied by that binary
// label. t itself does not have to be observed yet; only its five preceding
// hours must be in the series.
inline Eigen::VectorXd build_covariates(const ConsumptionSeries& series, HourStamp t,
                                        std::optional<int> latent = std::nullopt) {
  if (series.empty() || t - kLagHours < series.start() || t - 1 > series.end())
    throw std::invalid_argument("insufficient history for covariates at " + format_hour(t));
  const std::size_t base = static_cast<std::size_t>(t - series.start());

  Eigen::VectorXd x = Eigen::VectorXd::Zero(latent ? kLatentCovariateDim : kBaseCovariateDim);
  for (int lag = 1; lag <= kLagHours; ++lag) {
    const Sample& s = series.samples[base - static_cast<std::size_t>(lag)];
    x(lag - 1) = s.consumption;
    x(kLagHours + lag - 1) = s.temperature;
  }
  const int hour = hour_of_day(t);
  x(2 * kLagHours + hour) = 1.0;
  if (latent) x(kBaseCovariateDim + hour) = static_cast<double>(*latent);
  return x;
}

}  // namespace drcast
