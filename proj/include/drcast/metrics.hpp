#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

namespace drcast {

inline constexpr double kMapeZeroCutoff = 1e-9;

struct MapeResult {
  double percent = 0.0;
  int used = 0;
  int excluded = 0;  // points whose truth was within kMapeZeroCutoff of zero
};

// Mean absolute percentage error. Min-max scaled series contain an exact
// zero at each user's minimum, so near-zero truths are excluded and counted
// rather than blowing up the ratio.
inline MapeResult mape(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) throw std::invalid_argument("mape length mismatch");
  if (truth.empty()) throw std::invalid_argument("mape of empty vectors");
  MapeResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::abs(truth[i]) < kMapeZeroCutoff) {
      ++r.excluded;
      continue;
    }
    sum += std::abs((predictions[i] - truth[i]) / truth[i]);
    ++r.used;
  }
  if (r.used == 0) throw std::runtime_error("mape undefined: all truth values near zero");
  r.percent = sum / r.used * 100.0;
  return r;
}

}  // namespace drcast
