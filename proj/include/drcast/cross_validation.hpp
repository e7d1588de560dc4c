#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "drcast/design.hpp"
#include "drcast/metrics.hpp"
#include "drcast/regressor.hpp"

namespace drcast {

// Folds are contiguous, time-ordered blocks (rows are assumed to be in time
// order); shuffling would leak the strong serial dependence of hourly load.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> contiguous_folds(Eigen::Index n,
                                                                           int folds) {
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  if (n < folds) throw std::invalid_argument("fold too small: fewer rows than folds");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index lo = n * f / folds;
    const Eigen::Index hi = n * (f + 1) / folds;
    out.emplace_back(lo, hi);
  }
  return out;
}

namespace detail {

// Tie rule: prefer the simpler model (smaller k, shallower tree, wider tube).
inline bool simpler_than(RegressorKind kind, const HyperParams& a, const HyperParams& b) {
  switch (kind) {
    case RegressorKind::kOls: return false;
    case RegressorKind::kKnn: return a.knn_k < b.knn_k;
    case RegressorKind::kTree:
      if (a.tree_max_depth != b.tree_max_depth) return a.tree_max_depth < b.tree_max_depth;
      return a.tree_min_samples_leaf > b.tree_min_samples_leaf;
    case RegressorKind::kSvr: return a.svr_epsilon > b.svr_epsilon;
  }
  return false;
}

}  // namespace detail

struct CrossValidationResult {
  HyperParams best;
  double best_score = 0.0;                   // mean out-of-fold MAPE, percent
  std::vector<double> scores;                // one per grid candidate
};

inline CrossValidationResult cross_validate(const DesignMatrix& data, RegressorKind kind,
                                            const std::vector<HyperParams>& grid, int folds) {
  data.validate();
  if (grid.empty()) throw std::invalid_argument("empty hyperparameter grid");
  const auto blocks = contiguous_folds(data.rows(), folds);

  CrossValidationResult result;
  bool have_best = false;
  for (const HyperParams& hp : grid) {
    double total = 0.0;
    int scored_folds = 0;
    for (const auto& [lo, hi] : blocks) {
      const Eigen::Index n_train = data.rows() - (hi - lo);
      if (n_train < 1) throw std::invalid_argument("fold too small for method");
      DesignMatrix train;
      train.X.resize(n_train, data.cols());
      train.y.resize(n_train);
      Eigen::Index r = 0;
      for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if (i >= lo && i < hi) continue;
        train.X.row(r) = data.X.row(i);
        train.y(r) = data.y(i);
        ++r;
      }
      const FittedRegressor model = fit_regressor(train, kind, hp);
      std::vector<double> pred, truth;
      pred.reserve(static_cast<std::size_t>(hi - lo));
      for (Eigen::Index i = lo; i < hi; ++i) {
        pred.push_back(model.predict(data.X.row(i).transpose()));
        truth.push_back(data.y(i));
      }
      try {
        total += mape(pred, truth).percent;
        ++scored_folds;
      } catch (const std::runtime_error&) {
        // fold with only near-zero truths carries no signal
      }
    }
    if (scored_folds == 0) throw std::runtime_error("cross-validation score undefined");
    const double score = total / scored_folds;
    result.scores.push_back(score);
    const bool better =
        !have_best || score < result.best_score - 1e-12 ||
        (std::abs(score - result.best_score) <= 1e-12 && detail::simpler_than(kind, hp, result.best));
    if (better) {
      result.best = hp;
      result.best_score = score;
      have_best = true;
    }
  }
  return result;
}

}  // namespace drcast
