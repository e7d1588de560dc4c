#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "drcast/series.hpp"

namespace drcast {

struct AdfResult {
  double test_statistic = 0.0;
  int lags_used = 0;
  bool reject_unit_root_99 = false;
  double critical_value_99 = 0.0;
};

// MacKinnon (2010) response-surface 1% critical value for the constant-only
// Dickey-Fuller regression, interpolated by regression sample size.
inline double adf_critical_value_99(int nobs) {
  const double n = static_cast<double>(nobs);
  return -3.43035 - 6.5393 / n - 16.786 / (n * n) - 79.433 / (n * n * n);
}

namespace detail {

struct AdfRegression {
  double level_coef = 0.0;
  double level_se = 0.0;
  double ssr = 0.0;
  int rows = 0;
  int cols = 0;
};

// Regress d_t on [y_{t-1}, d_{t-1..t-p}, const] over the last `rows`
// usable observations.
inline AdfRegression adf_regression(std::span<const double> y, int p, int rows) {
  const int n = static_cast<int>(y.size());
  const int cols = p + 2;
  Eigen::MatrixXd x(rows, cols);
  Eigen::VectorXd b(rows);
  for (int i = 0; i < rows; ++i) {
    const int ti = (n - 1 - rows) + i;  // diff index: d[ti] = y[ti+1] - y[ti]
    b(i) = y[ti + 1] - y[ti];
    x(i, 0) = y[ti];
    for (int j = 1; j <= p; ++j) x(i, j) = y[ti - j + 1] - y[ti - j];
    x(i, cols - 1) = 1.0;
  }
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  const Eigen::VectorXd coef = ldlt.solve(x.transpose() * b);
  const Eigen::VectorXd resid = b - x * coef;

  AdfRegression out;
  out.rows = rows;
  out.cols = cols;
  out.ssr = resid.squaredNorm();
  out.level_coef = coef(0);
  const double sigma2 = out.ssr / static_cast<double>(rows - cols);
  const Eigen::VectorXd inv_col = ldlt.solve(Eigen::VectorXd::Unit(cols, 0));
  out.level_se = std::sqrt(sigma2 * inv_col(0));
  return out;
}

}  // namespace detail

// Augmented Dickey-Fuller test with constant term. The lag order is chosen by
// AIC over a shared sample (all candidates see the same rows), then the
// statistic comes from a refit on the full sample available at that lag.
inline AdfResult adf_test(std::span<const double> y, int max_lags) {
  const int n = static_cast<int>(y.size());
  if (max_lags < 0) throw std::invalid_argument("max_lags must be >= 0");
  if (n <= max_lags + 2) throw std::invalid_argument("insufficient data for ADF test");
  const int select_rows = n - 1 - max_lags;
  if (select_rows <= max_lags + 2)
    throw std::invalid_argument("insufficient data for ADF lag selection");

  int best_lag = 0;
  double best_aic = 0.0;
  for (int p = 0; p <= max_lags; ++p) {
    const auto reg = detail::adf_regression(y, p, select_rows);
    const double aic = select_rows * std::log(reg.ssr / select_rows) + 2.0 * (p + 2);
    if (p == 0 || aic < best_aic) {
      best_aic = aic;
      best_lag = p;
    }
  }

  const int final_rows = n - 1 - best_lag;
  const auto reg = detail::adf_regression(y, best_lag, final_rows);

  AdfResult result;
  result.lags_used = best_lag;
  result.test_statistic = reg.level_coef / reg.level_se;
  result.critical_value_99 = adf_critical_value_99(final_rows);
  result.reject_unit_root_99 = result.test_statistic < result.critical_value_99;
  return result;
}

inline AdfResult adf_test(const ConsumptionSeries& series, int max_lags) {
  std::vector<double> y;
  y.reserve(series.size());
  for (const Sample& s : series.samples) y.push_back(s.consumption);
  return adf_test(std::span<const double>(y), max_lags);
}

}  // namespace drcast
