#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "drcast/design.hpp"
#include "drcast/em_trace.hpp"
#include "drcast/ols.hpp"
#include "drcast/rng.hpp"
#include "drcast/stats.hpp"

namespace drcast {

inline constexpr double kCgmmVarianceFloor = 1e-10;

// Conditional Gaussian mixture of linear regressions: K mixing weights, K
// coefficient vectors, one shared noise variance. Training responsibilities
// and covariates are retained because prediction weights a new point by the
// responsibilities of its nearest training neighbor.
struct CgmmModel {
  int components = 1;
  Eigen::VectorXd mixing;               // pi_k
  Eigen::MatrixXd coefficients;         // d x K, column k is w_k
  double noise_variance = 1.0;          // sigma^2, shared across components
  Eigen::MatrixXd responsibilities;     // N x K, final E-step on the training data
  Eigen::MatrixXd training_covariates;  // N x d
  bool rank_deficient = false;          // any weighted solve fell back to pseudo-inverse
};

namespace detail {

// Log-space E-step; returns the responsibilities and the observed-data
// log-likelihood. The textbook ratio form underflows for small sigma^2.
inline std::pair<Eigen::MatrixXd, double> cgmm_e_step_ll(const Eigen::VectorXd& mixing,
                                                         const Eigen::MatrixXd& coefficients,
                                                         double noise_variance,
                                                         const DesignMatrix& data) {
  const Eigen::Index n = data.rows();
  const int k = static_cast<int>(mixing.size());
  Eigen::MatrixXd fitted = data.X * coefficients;  // n x k
  Eigen::MatrixXd resp(n, k);
  double ll = 0.0;
  std::vector<double> row(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < k; ++c) {
      row[static_cast<std::size_t>(c)] =
          std::log(mixing(c)) + gaussian_log_pdf(data.y(i), fitted(i, c), noise_variance);
    }
    const double lse = log_sum_exp(row);
    if (!std::isfinite(lse))
      throw std::runtime_error("cgmm E-step: zero density for every component");
    for (int c = 0; c < k; ++c)
      resp(i, c) = std::exp(row[static_cast<std::size_t>(c)] - lse);
    ll += lse;
  }
  return {std::move(resp), ll};
}

}  // namespace detail

inline Eigen::MatrixXd cgmm_e_step(const CgmmModel& model, const DesignMatrix& data) {
  data.validate();
  if (data.cols() != model.coefficients.rows())
    throw std::invalid_argument("cgmm dimension mismatch");
  return detail::cgmm_e_step_ll(model.mixing, model.coefficients, model.noise_variance, data)
      .first;
}

struct CgmmMStep {
  Eigen::VectorXd mixing;
  Eigen::MatrixXd coefficients;
  double noise_variance = 0.0;
  bool rank_deficient = false;
};

// pi_k = mean responsibility; w_k solves the responsibility-weighted least
// squares; sigma^2 pools the weighted residuals across all components.
inline CgmmMStep cgmm_m_step(const Eigen::MatrixXd& responsibilities, const DesignMatrix& data) {
  data.validate();
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  const int k = static_cast<int>(responsibilities.cols());
  if (responsibilities.rows() != n) throw std::invalid_argument("responsibility rows mismatch");

  CgmmMStep out;
  out.mixing = responsibilities.colwise().mean();
  out.coefficients.resize(d, k);
  for (int c = 0; c < k; ++c) {
    const Eigen::VectorXd w = responsibilities.col(c).cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd xw = w.asDiagonal() * data.X;
    const Eigen::VectorXd yw = w.asDiagonal() * data.y;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(xw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.coefficients.col(c) = svd.solve(yw);
    if (svd.rank() < d) out.rank_deficient = true;
  }
  double sse = 0.0;
  const Eigen::MatrixXd fitted = data.X * out.coefficients;
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) {
      const double r = data.y(i) - fitted(i, c);
      sse += responsibilities(i, c) * r * r;
    }
  out.noise_variance = std::max(sse / static_cast<double>(n), kCgmmVarianceFloor);
  return out;
}

// EM fit per the online-prediction recipe: initialize every w_k as the OLS
// solution plus seeded Gaussian noise (the symmetric fixed point otherwise
// never separates), then alternate E and M steps until the log-likelihood
// gain drops below tol.
inline std::pair<CgmmModel, EmTrace> fit_cgmm(const DesignMatrix& data, int components,
                                              std::uint64_t seed, double tol = 1e-6,
                                              int max_iter = 500) {
  data.validate();
  if (components < 1) throw std::invalid_argument("components must be >= 1");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");

  EmTrace trace;
  if (data.rows() <= static_cast<Eigen::Index>(components) * data.cols())
    trace.warnings.push_back("fewer rows than components*dimension; fit may be unstable");

  const LinearModel base = fit_ols(data);
  const Eigen::Index d = data.cols();
  const double perturb_sd =
      0.1 * base.weights.norm() / std::sqrt(static_cast<double>(d));
  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::VectorXd mixing = Eigen::VectorXd::Constant(components, 1.0 / components);
  Eigen::MatrixXd coefficients(d, components);
  for (int c = 0; c < components; ++c) {
    coefficients.col(c) = base.weights;
    for (Eigen::Index j = 0; j < d; ++j) coefficients(j, c) += perturb_sd * gauss(rng);
  }
  double noise_variance =
      std::max((data.y - data.X * base.weights).squaredNorm() / static_cast<double>(data.rows()),
               kCgmmVarianceFloor);

  auto [resp, ll] = detail::cgmm_e_step_ll(mixing, coefficients, noise_variance, data);
  trace.log_likelihood.push_back(ll);
  bool rank_deficient = false;
  for (int m = 1; m <= max_iter; ++m) {
    const CgmmMStep step = cgmm_m_step(resp, data);
    mixing = step.mixing;
    coefficients = step.coefficients;
    noise_variance = step.noise_variance;
    rank_deficient = rank_deficient || step.rank_deficient;

    auto [resp_new, ll_new] = detail::cgmm_e_step_ll(mixing, coefficients, noise_variance, data);
    trace.log_likelihood.push_back(ll_new);
    trace.iterations = m;
    resp = std::move(resp_new);
    const double gain = ll_new - ll;
    ll = ll_new;
    if (gain < tol) {
      trace.converged = true;
      break;
    }
  }

  CgmmModel model;
  model.components = components;
  model.mixing = std::move(mixing);
  model.coefficients = std::move(coefficients);
  model.noise_variance = noise_variance;
  model.responsibilities = std::move(resp);
  model.training_covariates = data.X;
  model.rank_deficient = rank_deficient;
  return {std::move(model), std::move(trace)};
}

// Nearest-neighbor weighted prediction: the responsibilities of x's nearest
// training covariate weight the per-component linear predictions.
inline double cgmm_predict(const CgmmModel& model, const Eigen::VectorXd& x) {
  const Eigen::Index n = model.training_covariates.rows();
  if (n == 0) throw std::runtime_error("cgmm_predict: empty training set");
  if (x.size() != model.training_covariates.cols())
    throw std::invalid_argument("covariate dimension mismatch");
  Eigen::Index best = 0;
  double best_d2 = (model.training_covariates.row(0).transpose() - x).squaredNorm();
  for (Eigen::Index i = 1; i < n; ++i) {
    const double d2 = (model.training_covariates.row(i).transpose() - x).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  double out = 0.0;
  for (int c = 0; c < model.components; ++c)
    out += model.responsibilities(best, c) * model.coefficients.col(c).dot(x);
  return out;
}

inline void to_json(nlohmann::json& j, const CgmmModel& model) {
  const auto matrix = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row;
      row.reserve(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j = nlohmann::json{
      {"components", model.components},
      {"mixing", std::vector<double>(model.mixing.data(), model.mixing.data() + model.mixing.size())},
      {"coefficients", matrix(model.coefficients)},
      {"noise_variance", model.noise_variance},
      {"responsibilities", matrix(model.responsibilities)},
      {"training_covariates", matrix(model.training_covariates)},
      {"rank_deficient", model.rank_deficient}};
}

inline void from_json(const nlohmann::json& j, CgmmModel& model) {
  const auto matrix = [](const nlohmann::json& rows) {
    Eigen::MatrixXd m;
    if (rows.empty()) return m;
    m.resize(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
    return m;
  };
  model.components = j.at("components").get<int>();
  const auto mixing = j.at("mixing").get<std::vector<double>>();
  model.mixing = Eigen::Map<const Eigen::VectorXd>(mixing.data(),
                                                   static_cast<Eigen::Index>(mixing.size()));
  model.coefficients = matrix(j.at("coefficients"));
  model.noise_variance = j.at("noise_variance").get<double>();
  model.responsibilities = matrix(j.at("responsibilities"));
  model.training_covariates = matrix(j.at("training_covariates"));
  model.rank_deficient = j.value("rank_deficient", false);
}

}  // namespace drcast
