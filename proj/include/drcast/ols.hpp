#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "drcast/design.hpp"

namespace drcast {

struct LinearModel {
  Eigen::VectorXd weights;
  // True when X was rank-deficient and the minimum-norm solution was taken.
  bool rank_deficient = false;
};

// Least squares via SVD: well-posed designs give the usual OLS solution,
// collinear ones (e.g. one-hot blocks that sum to a constant) fall back to
// the minimum-norm pseudo-inverse solution.
inline LinearModel fit_ols(const DesignMatrix& data) {
  data.validate();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(data.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  LinearModel model;
  model.weights = svd.solve(data.y);
  model.rank_deficient = svd.rank() < data.cols();
  return model;
}

inline double predict_linear(const LinearModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.weights.size())
    throw std::invalid_argument("covariate dimension mismatch");
  return model.weights.dot(x);
}

}  // namespace drcast
