#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace drcast {

// Covariate rows X with aligned outcomes y.
struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("empty design matrix");
    if (y.size() != X.rows()) throw std::invalid_argument("outcome length mismatch");
    if (!X.allFinite() || !y.allFinite())
      throw std::invalid_argument("non-finite entries in design matrix");
  }
};

inline void check_dimension(const DesignMatrix& data, const Eigen::VectorXd& x) {
  if (x.size() != data.cols()) throw std::invalid_argument("covariate dimension mismatch");
}

}  // namespace drcast
