#pragma once

// Brute-force reference for the HMM inference queries: enumerate every state
// path, accumulate unnormalized joint weights, and normalize. Independent of
// the scaled alpha-beta implementation; only feasible for tiny M and T.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "drcast/hmm.hpp"

namespace drcast::testing {

struct EnumerationResult {
  double probability = 0.0;            // P(Y)
  Eigen::MatrixXd marginals;           // (T+1) x M
  std::vector<Eigen::MatrixXd> pairwise;  // T tables of M x M
  Eigen::VectorXd predicted;           // P(q_{T+1} | Y)
};

inline double gaussian_pdf(double y, double mu, double var) {
  const double d = y - mu;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline EnumerationResult enumerate_hmm(const HmmModel& model, std::span<const double> y) {
  const int m = model.states();
  const int t_max = static_cast<int>(y.size()) - 1;
  EnumerationResult result;
  result.marginals = Eigen::MatrixXd::Zero(t_max + 1, m);
  result.pairwise.assign(static_cast<std::size_t>(t_max), Eigen::MatrixXd::Zero(m, m));
  result.predicted = Eigen::VectorXd::Zero(m);

  std::vector<int> path(static_cast<std::size_t>(t_max + 1), 0);
  while (true) {
    double w = model.initial(path[0]);
    for (int t = 0; t <= t_max && w > 0.0; ++t) {
      w *= gaussian_pdf(y[static_cast<std::size_t>(t)], model.mean(path[static_cast<std::size_t>(t)]),
                        model.variance(path[static_cast<std::size_t>(t)]));
      if (t < t_max) w *= model.transition(path[static_cast<std::size_t>(t)],
                                           path[static_cast<std::size_t>(t + 1)]);
    }
    if (w > 0.0) {
      result.probability += w;
      for (int t = 0; t <= t_max; ++t)
        result.marginals(t, path[static_cast<std::size_t>(t)]) += w;
      for (int t = 0; t < t_max; ++t)
        result.pairwise[static_cast<std::size_t>(t)](path[static_cast<std::size_t>(t)],
                                                     path[static_cast<std::size_t>(t + 1)]) += w;
      for (int j = 0; j < m; ++j)
        result.predicted(j) += w * model.transition(path[static_cast<std::size_t>(t_max)], j);
    }
    // advance the mixed-radix counter
    int pos = 0;
    while (pos <= t_max) {
      if (++path[static_cast<std::size_t>(pos)] < m) break;
      path[static_cast<std::size_t>(pos)] = 0;
      ++pos;
    }
    if (pos > t_max) break;
  }

  result.marginals /= result.probability;
  for (auto& table : result.pairwise) table /= result.probability;
  result.predicted /= result.probability;
  return result;
}

}  // namespace drcast::testing
