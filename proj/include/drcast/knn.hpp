#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "drcast/design.hpp"

namespace drcast {

// Mean outcome of the k rows nearest to x in Euclidean distance; distance
// ties resolve to the lower row index. Covariates are deliberately used at
// their raw scale (see cross_validation.hpp for the optional scaling toggle).
inline double knn_predict(const DesignMatrix& data, const Eigen::VectorXd& x, int k) {
  check_dimension(data, x);
  const Eigen::Index n = data.rows();
  if (k < 1 || k > n) throw std::invalid_argument("k out of range");

  std::vector<std::pair<double, Eigen::Index>> dist;
  dist.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    dist.emplace_back((data.X.row(i).transpose() - x).squaredNorm(), i);
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  double sum = 0.0;
  for (int j = 0; j < k; ++j) sum += data.y(dist[static_cast<std::size_t>(j)].second);
  return sum / static_cast<double>(k);
}

}  // namespace drcast
