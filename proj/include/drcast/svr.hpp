#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "drcast/design.hpp"

namespace drcast {

struct SvrModel {
  Eigen::MatrixXd support_rows;  // retained training rows with nonzero multiplier
  Eigen::VectorXd coefficients;  // beta_i = alpha_i - alpha_i^*, in [-C, C]
  double bias = 0.0;
  double gamma = 1.0;
  double C = 1.0;
  double epsilon = 0.0;
  bool converged = false;
  int iterations = 0;
  double kkt_gap = 0.0;
};

struct SvrOptions {
  double tol = 1e-3;      // stop when the maximal KKT violation drops below this
  int max_iter = 100000;  // pairwise update cap
};

// Epsilon-SVR with Gaussian kernel, solved in the dual by SMO-style pairwise
// coordinate ascent over the 2N split variables (alpha, alpha*). Pairs are
// chosen as the maximal violating pair; each update moves both variables
// along the equality constraint, so sum(beta) stays at zero.
inline SvrModel fit_svr(const DesignMatrix& data, double C, double epsilon, double gamma,
                        const SvrOptions& options = {}) {
  data.validate();
  if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");

  const int n = static_cast<int>(data.rows());
  Eigen::MatrixXd kernel(n, n);
  for (int i = 0; i < n; ++i) {
    kernel(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double d2 = (data.X.row(i) - data.X.row(j)).squaredNorm();
      kernel(i, j) = kernel(j, i) = std::exp(-gamma * d2);
    }
  }

  // Split variables z[u]: u < n holds alpha_i (sign +1), u >= n alpha*_i
  // (sign -1). g_i = sum_j beta_j K_ij is the margin without bias.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2 * n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  const auto value = [&](int u) {
    // v_u = -s_u * G_u; at the optimum every free variable has v_u = bias.
    return u < n ? data.y(u) - epsilon - g(u) : data.y(u - n) + epsilon - g(u - n);
  };

  double m_up = 0.0, m_low = 0.0;
  int iter = 0;
  bool converged = false;
  while (true) {
    int iu = -1, il = -1;
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    for (int u = 0; u < 2 * n; ++u) {
      const bool plus = u < n;
      const double v = value(u);
      const bool in_up = plus ? z(u) < C : z(u) > 0.0;
      const bool in_low = plus ? z(u) > 0.0 : z(u) < C;
      if (in_up && v > m_up) {
        m_up = v;
        iu = u;
      }
      if (in_low && v < m_low) {
        m_low = v;
        il = u;
      }
    }
    if (iu < 0 || il < 0 || m_up - m_low < options.tol) {
      converged = true;
      break;
    }
    if (iter >= options.max_iter) break;
    ++iter;

    const int i = iu % n, j = il % n;
    const double quad = std::max(kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j), 1e-12);
    double step = (m_up - m_low) / quad;
    // Box caps along the constraint line for both endpoints.
    const double cap_u = iu < n ? C - z(iu) : z(iu);
    const double cap_l = il < n ? z(il) : C - z(il);
    step = std::min(step, std::min(cap_u, cap_l));

    z(iu) += (iu < n ? step : -step);
    z(il) -= (il < n ? step : -step);
    beta(i) += step;
    beta(j) -= step;
    g += step * (kernel.col(i) - kernel.col(j));
  }

  SvrModel model;
  model.gamma = gamma;
  model.C = C;
  model.epsilon = epsilon;
  model.converged = converged;
  model.iterations = iter;
  model.kkt_gap = std::max(m_up - m_low, 0.0);
  model.bias = 0.5 * (m_up + m_low);
  if (!std::isfinite(model.bias)) model.bias = 0.0;  // empty index sets cannot happen for n >= 1

  int support = 0;
  for (int i = 0; i < n; ++i) support += beta(i) != 0.0;
  model.support_rows.resize(support, data.cols());
  model.coefficients.resize(support);
  for (int i = 0, s = 0; i < n; ++i) {
    if (beta(i) == 0.0) continue;
    model.support_rows.row(s) = data.X.row(i);
    model.coefficients(s) = beta(i);
    ++s;
  }
  return model;
}

inline double svr_predict(const SvrModel& model, const Eigen::VectorXd& x) {
  if (model.support_rows.cols() > 0 && x.size() != model.support_rows.cols())
    throw std::invalid_argument("covariate dimension mismatch");
  double out = model.bias;
  for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) {
    const double d2 = (model.support_rows.row(i).transpose() - x).squaredNorm();
    out += model.coefficients(i) * std::exp(-model.gamma * d2);
  }
  return out;
}

}  // namespace drcast
