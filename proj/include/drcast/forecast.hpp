#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "drcast/cgmm.hpp"
#include "drcast/covariates.hpp"
#include "drcast/design.hpp"
#include "drcast/hmm.hpp"
#include "drcast/metrics.hpp"
#include "drcast/regressor.hpp"
#include "drcast/series.hpp"
#include "drcast/state_space.hpp"

namespace drcast {

struct ForecastConfig {
  std::uint64_t seed = 0;
  HyperParams hyper;
  int cgmm_components = 2;
  double em_tol = 1e-6;
  int em_max_iter = 500;
  // Refit model parameters after every absorbed test observation. Off by
  // default: the reference procedure freezes parameters during the test loop.
  bool online_update = false;
};

struct ForecastRun {
  std::string user_id;
  std::string method;
  std::vector<HourStamp> timestamps;
  std::vector<double> y_true;
  std::vector<double> y_pred;
  std::vector<int> latent;  // -1 for methods without a latent label
  MapeResult score;
  nlohmann::json params;  // hyperparameters actually used
};

namespace detail {

inline void check_split(const ConsumptionSeries& train, const ConsumptionSeries& test) {
  if (train.size() <= kLagHours + 1)
    throw std::invalid_argument("training series too short for lag covariates");
  if (!test.empty() && test.start() != train.end() + 1)
    throw std::invalid_argument("test series must contiguously follow the training series");
}

inline ConsumptionSeries concat(const ConsumptionSeries& train, const ConsumptionSeries& test) {
  ConsumptionSeries all = train;
  all.samples.insert(all.samples.end(), test.samples.begin(), test.samples.end());
  return all;
}

inline DesignMatrix training_design(const ConsumptionSeries& train,
                                    const std::vector<int>* labels) {
  const std::size_t first = kLagHours;
  const std::size_t rows = train.size() - first;
  DesignMatrix data;
  data.X.resize(static_cast<Eigen::Index>(rows),
                labels ? kLatentCovariateDim : kBaseCovariateDim);
  data.y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t t_idx = first + i;
    const std::optional<int> label =
        labels ? std::optional<int>((*labels)[t_idx]) : std::nullopt;
    data.X.row(static_cast<Eigen::Index>(i)) =
        build_covariates(train, train.samples[t_idx].t, label).transpose();
    data.y(static_cast<Eigen::Index>(i)) = train.samples[t_idx].consumption;
  }
  return data;
}

inline void finish_run(ForecastRun& run) {
  if (!run.y_true.empty()) run.score = mape(run.y_pred, run.y_true);
}

}  // namespace detail

// Stepwise one-step-ahead prediction with the plain covariates (no latent
// block). Lags always come from observed history, so each test hour is
// predicted from the truth of the preceding hours.
inline ForecastRun forecast_baseline(const ConsumptionSeries& train,
                                     const ConsumptionSeries& test, RegressorKind kind,
                                     const ForecastConfig& config) {
  detail::check_split(train, test);
  ForecastRun run;
  run.user_id = train.user_id;
  run.method = regressor_name(kind);
  run.params = {{"kind", regressor_name(kind)}};
  if (kind == RegressorKind::kKnn) run.params["k"] = config.hyper.knn_k;
  if (kind == RegressorKind::kSvr) {
    run.params["C"] = config.hyper.svr_C;
    run.params["epsilon"] = config.hyper.svr_epsilon;
    run.params["gamma"] = config.hyper.svr_gamma;
  }
  if (kind == RegressorKind::kTree) {
    run.params["max_depth"] = config.hyper.tree_max_depth;
    run.params["min_samples_leaf"] = config.hyper.tree_min_samples_leaf;
  }

  ConsumptionSeries observed = train;
  DesignMatrix design = detail::training_design(observed, nullptr);
  FittedRegressor model = fit_regressor(design, kind, config.hyper);
  for (const Sample& s : test.samples) {
    const Eigen::VectorXd x = build_covariates(observed, s.t);
    run.timestamps.push_back(s.t);
    run.y_pred.push_back(model.predict(x));
    run.y_true.push_back(s.consumption);
    run.latent.push_back(-1);
    observed.samples.push_back(s);
    if (config.online_update) {
      design = detail::training_design(observed, nullptr);
      model = fit_regressor(design, kind, config.hyper);
    }
  }
  detail::finish_run(run);
  return run;
}

// Online prediction with the hour-of-day HMM: fit the chain on the training
// series, label every training hour by smoothing (filtering at the last
// hour), fit the regressor on latent-augmented covariates, then walk the test
// hours solving the one-step state prediction problem before each forecast.
inline ForecastRun forecast_hmm(const ConsumptionSeries& train, const ConsumptionSeries& test,
                                RegressorKind kind, const ForecastConfig& config) {
  detail::check_split(train, test);
  const StateSpace space = build_state_space();

  std::vector<double> train_y;
  train_y.reserve(train.size());
  for (const Sample& s : train.samples) train_y.push_back(s.consumption);

  auto [hmm, trace] = fit_hmm(train, config.em_tol, config.em_max_iter, config.seed);

  // Smoothing gives P(q_t | Y) for every training hour; the row at t = T is
  // the filtered distribution, matching the procedure's last step.
  const PosteriorTable post = posteriors(hmm, train_y);
  std::vector<int> labels(train.size());
  for (std::size_t t = 0; t < train.size(); ++t)
    labels[t] = latent_label(post.marginals.row(static_cast<Eigen::Index>(t)).transpose(), space);

  ConsumptionSeries observed = train;
  std::vector<int> observed_labels = labels;
  DesignMatrix design = detail::training_design(observed, &observed_labels);
  FittedRegressor model = fit_regressor(design, kind, config.hyper);

  HmmFilter filter_state(hmm);
  for (const double y : train_y) filter_state.absorb(y);

  ForecastRun run;
  run.user_id = train.user_id;
  run.method = std::string(regressor_name(kind)) + "+hmm";
  run.params = {{"kind", run.method},
                {"hmm_iterations", trace.iterations},
                {"hmm_converged", trace.converged}};

  for (const Sample& s : test.samples) {
    const int label = latent_label(filter_state.predicted(), space);
    const Eigen::VectorXd x = build_covariates(observed, s.t, label);
    run.timestamps.push_back(s.t);
    run.y_pred.push_back(model.predict(x));
    run.y_true.push_back(s.consumption);
    run.latent.push_back(label);
    filter_state.absorb(s.consumption);
    observed.samples.push_back(s);
    if (config.online_update) {
      std::vector<double> seen;
      seen.reserve(observed.size());
      for (const Sample& o : observed.samples) seen.push_back(o.consumption);
      auto refit = fit_hmm_model(hmm, seen, config.em_tol, config.em_max_iter);
      hmm = std::move(refit.first);
      const PosteriorTable repost = posteriors(hmm, seen);
      observed_labels.resize(observed.size());
      for (std::size_t t = 0; t < observed.size(); ++t)
        observed_labels[t] =
            latent_label(repost.marginals.row(static_cast<Eigen::Index>(t)).transpose(), space);
      design = detail::training_design(observed, &observed_labels);
      model = fit_regressor(design, kind, config.hyper);
      filter_state = HmmFilter(hmm);
      for (const double y : seen) filter_state.absorb(y);
    }
  }
  detail::finish_run(run);
  return run;
}

// Online prediction with the conditional Gaussian mixture (K = 2 by default):
// fit on the plain training covariates, then predict each test hour via the
// nearest-neighbor responsibility weighting.
inline ForecastRun forecast_cgmm(const ConsumptionSeries& train, const ConsumptionSeries& test,
                                 const ForecastConfig& config) {
  detail::check_split(train, test);

  ConsumptionSeries observed = train;
  DesignMatrix design = detail::training_design(observed, nullptr);
  auto [model, trace] =
      fit_cgmm(design, config.cgmm_components, config.seed, config.em_tol, config.em_max_iter);

  ForecastRun run;
  run.user_id = train.user_id;
  run.method = "cgmm";
  run.params = {{"kind", "cgmm"},
                {"components", config.cgmm_components},
                {"em_iterations", trace.iterations},
                {"em_converged", trace.converged}};

  for (const Sample& s : test.samples) {
    const Eigen::VectorXd x = build_covariates(observed, s.t);
    run.timestamps.push_back(s.t);
    run.y_pred.push_back(cgmm_predict(model, x));
    run.y_true.push_back(s.consumption);
    run.latent.push_back(-1);
    observed.samples.push_back(s);
    if (config.online_update) {
      design = detail::training_design(observed, nullptr);
      auto refit =
          fit_cgmm(design, config.cgmm_components, config.seed, config.em_tol, config.em_max_iter);
      model = std::move(refit.first);
    }
  }
  detail::finish_run(run);
  return run;
}

}  // namespace drcast
