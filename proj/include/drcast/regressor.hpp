#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

#include "drcast/design.hpp"
#include "drcast/knn.hpp"
#include "drcast/ols.hpp"
#include "drcast/svr.hpp"
#include "drcast/tree.hpp"

namespace drcast {

enum class RegressorKind { kOls, kKnn, kSvr, kTree };

inline const char* regressor_name(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::kOls: return "ols";
    case RegressorKind::kKnn: return "knn";
    case RegressorKind::kSvr: return "svr";
    case RegressorKind::kTree: return "dt";
  }
  return "?";
}

inline RegressorKind regressor_from_name(const std::string& name) {
  if (name == "ols") return RegressorKind::kOls;
  if (name == "knn") return RegressorKind::kKnn;
  if (name == "svr") return RegressorKind::kSvr;
  if (name == "dt") return RegressorKind::kTree;
  throw std::invalid_argument("unknown regressor '" + name + "'");
}

struct HyperParams {
  int knn_k = 10;
  double svr_C = 1.0;
  double svr_epsilon = 0.01;
  double svr_gamma = 0.0;  // <= 0 resolves to 1/d at fit time
  int tree_max_depth = 8;
  int tree_min_samples_leaf = 5;
};

// Uniform fit-then-predict wrapper so the forecasting loops treat the four
// §II-style baselines interchangeably.
struct FittedRegressor {
  std::function<double(const Eigen::VectorXd&)> predict;
};

inline FittedRegressor fit_regressor(const DesignMatrix& train, RegressorKind kind,
                                     const HyperParams& hp) {
  switch (kind) {
    case RegressorKind::kOls: {
      auto model = std::make_shared<LinearModel>(fit_ols(train));
      return {[model](const Eigen::VectorXd& x) { return predict_linear(*model, x); }};
    }
    case RegressorKind::kKnn: {
      auto data = std::make_shared<DesignMatrix>(train);
      const int k = hp.knn_k;
      if (k < 1 || k > data->rows()) throw std::invalid_argument("knn_k out of range for fold");
      return {[data, k](const Eigen::VectorXd& x) { return knn_predict(*data, x, k); }};
    }
    case RegressorKind::kSvr: {
      const double gamma =
          hp.svr_gamma > 0.0 ? hp.svr_gamma : 1.0 / static_cast<double>(train.cols());
      auto model = std::make_shared<SvrModel>(fit_svr(train, hp.svr_C, hp.svr_epsilon, gamma));
      return {[model](const Eigen::VectorXd& x) { return svr_predict(*model, x); }};
    }
    case RegressorKind::kTree: {
      auto model = std::make_shared<RegressionTree>(
          fit_tree(train, hp.tree_max_depth, hp.tree_min_samples_leaf));
      return {[model](const Eigen::VectorXd& x) { return tree_predict(*model, x); }};
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace drcast
