#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drcast/forecast.hpp"
#include "drcast/rng.hpp"
#include "drcast/series.hpp"
#include "drcast/stats.hpp"

namespace drcast {

// Synthetic outcomes and counterfactual predictions are snapped to this
// binary grid. Differences of grid values of magnitude <= 2 are exact in
// double precision, which makes the reduction-error identity
// (yhat_delta - y_delta) == (yhat0 - y0) hold bit for bit instead of only up
// to rounding.
inline constexpr double kOutcomeGrid = 4294967296.0;  // 2^32

inline double quantize_outcome(double v) { return std::round(v * kOutcomeGrid) / kOutcomeGrid; }

// ---------------------------------------------------------------------------
// Treatment bookkeeping

struct TreatmentLedger {
  std::string user_id;
  std::vector<std::size_t> pretreatment;  // indices before signup
  std::vector<std::size_t> control;       // post-signup, not treated
  std::vector<std::size_t> treatment;     // DR event hours
  std::vector<std::size_t> placebo;       // subset of control, hour-matched
  bool automation = false;
};

// Partition the series at the signup hour. DR events map to single hourly
// indices and must not precede the signup.
inline TreatmentLedger split_by_signup(const ConsumptionSeries& series, HourStamp signup,
                                       const std::vector<HourStamp>& dr_events) {
  if (series.empty() || signup < series.start() || signup > series.end())
    throw std::invalid_argument("signup outside series range");
  TreatmentLedger ledger;
  ledger.user_id = series.user_id;

  std::vector<bool> treated(series.size(), false);
  for (const HourStamp event : dr_events) {
    if (event < signup)
      throw std::invalid_argument("DR event at " + format_hour(event) + " precedes signup");
    if (event < series.start() || event > series.end())
      throw std::invalid_argument("DR event at " + format_hour(event) + " outside series");
    treated[series.index_of(event)] = true;
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.samples[i].t < signup) {
      ledger.pretreatment.push_back(i);
    } else if (treated[i]) {
      ledger.treatment.push_back(i);
    } else {
      ledger.control.push_back(i);
    }
  }
  return ledger;
}

// Placebo hours: control hours inside the 6:00-20:00 window, sampled without
// replacement to match the treatment set's hour-of-day frequencies.
inline void select_placebos(const ConsumptionSeries& series, TreatmentLedger& ledger,
                            std::uint64_t seed) {
  std::vector<int> wanted(24, 0);
  for (const std::size_t i : ledger.treatment)
    ++wanted[static_cast<std::size_t>(hour_of_day(series.samples[i].t))];

  std::vector<std::vector<std::size_t>> candidates(24);
  for (const std::size_t i : ledger.control) {
    const int hour = hour_of_day(series.samples[i].t);
    if (is_dual_hour(hour)) candidates[static_cast<std::size_t>(hour)].push_back(i);
  }

  std::mt19937_64 rng = make_rng(seed);
  ledger.placebo.clear();
  for (int hour = 0; hour < 24; ++hour) {
    auto& pool = candidates[static_cast<std::size_t>(hour)];
    const std::size_t take =
        std::min(pool.size(), static_cast<std::size_t>(wanted[static_cast<std::size_t>(hour)]));
    for (std::size_t j = 0; j < take; ++j) {
      const std::size_t pick =
          j + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pool.size() - j));
      std::swap(pool[j], pool[pick]);
      ledger.placebo.push_back(pool[j]);
    }
  }
  std::sort(ledger.placebo.begin(), ledger.placebo.end());
}

// ---------------------------------------------------------------------------
// Semi-synthetic construction

// Known-ground-truth evaluation set: after a synthetic signup, a seeded
// Bernoulli subset of the 6:00-20:00 hours is "treated" by subtracting a
// Uniform[0, cbar] draw, and both potential outcomes are retained.
struct SemiSyntheticSet {
  HourStamp synthetic_signup = 0;
  std::vector<std::size_t> treated;  // indices into the source series
  std::vector<double> y0;            // untreated outcome (grid-quantized)
  std::vector<double> y1;            // treated outcome, y1 = y0 - draw
  std::vector<double> draw;          // injected reduction, in [0, cbar]
  double cbar = 0.0;
  double treat_fraction = 0.0;
  std::uint64_t seed = 0;
  ConsumptionSeries treated_series;  // source series with y1 at treated hours
};

inline SemiSyntheticSet make_semisynthetic(const ConsumptionSeries& series, HourStamp signup,
                                           double treat_fraction, double cbar,
                                           std::uint64_t seed) {
  if (!(treat_fraction > 0.0 && treat_fraction <= 1.0))
    throw std::invalid_argument("treat_fraction must be in (0, 1]");
  if (!(cbar >= 0.0)) throw std::invalid_argument("cbar must be non-negative");
  if (series.empty() || signup < series.start() || signup > series.end())
    throw std::invalid_argument("synthetic signup outside series range");

  SemiSyntheticSet set;
  set.synthetic_signup = signup;
  set.cbar = cbar;
  set.treat_fraction = treat_fraction;
  set.seed = seed;
  set.treated_series = series;

  std::mt19937_64 rng = make_rng(seed);
  bool any_eligible = false;
  for (std::size_t i = series.index_of(signup); i < series.size(); ++i) {
    if (!is_dual_hour(hour_of_day(series.samples[i].t))) continue;
    any_eligible = true;
    if (uniform01(rng) >= treat_fraction) continue;
    const double y0 = quantize_outcome(series.samples[i].consumption);
    const double u = quantize_outcome(uniform01(rng) * cbar);
    set.treated.push_back(i);
    set.y0.push_back(y0);
    set.draw.push_back(u);
    set.y1.push_back(y0 - u);
    set.treated_series.samples[i].consumption = y0 - u;
  }
  if (!any_eligible) throw std::runtime_error("no eligible treatment hours after signup");
  return set;
}

// ---------------------------------------------------------------------------
// Counterfactual predictions

// The analysis forecaster, frozen after training on pretreatment data.
// Defaults to OLS with the HMM latent label; `with_latent = false` drops the
// latent block for comparison runs.
struct CounterfactualModel {
  RegressorKind kind = RegressorKind::kOls;
  bool with_latent = true;
  ForecastConfig config;
  HmmModel hmm;
  StateSpace space;
  FittedRegressor regressor;
  HourStamp train_start = 0;
  HourStamp train_end = 0;
};

inline CounterfactualModel fit_counterfactual_model(const ConsumptionSeries& train,
                                                    RegressorKind kind,
                                                    const ForecastConfig& config,
                                                    bool with_latent = true) {
  CounterfactualModel model;
  model.kind = kind;
  model.with_latent = with_latent;
  model.config = config;
  model.space = build_state_space();
  model.train_start = train.start();
  model.train_end = train.end();

  if (with_latent) {
    std::vector<double> train_y;
    train_y.reserve(train.size());
    for (const Sample& s : train.samples) train_y.push_back(s.consumption);
    auto [hmm, trace] = fit_hmm(train, config.em_tol, config.em_max_iter, config.seed);
    model.hmm = std::move(hmm);
    const PosteriorTable post = posteriors(model.hmm, train_y);
    std::vector<int> labels(train.size());
    for (std::size_t t = 0; t < train.size(); ++t)
      labels[t] =
          latent_label(post.marginals.row(static_cast<Eigen::Index>(t)).transpose(), model.space);
    const DesignMatrix design = detail::training_design(train, &labels);
    model.regressor = fit_regressor(design, kind, config.hyper);
  } else {
    const DesignMatrix design = detail::training_design(train, nullptr);
    model.regressor = fit_regressor(design, kind, config.hyper);
  }
  return model;
}

struct CounterfactualEstimate {
  std::vector<double> y0_hat;  // grid-quantized counterfactual per target
  std::vector<int> latent;     // predicted latent label per target (-1 without)
};

// Applies the frozen model to the observed (treated) series: lags use the
// observed history exactly as the online protocol would see it, and targets
// must lie strictly after the training window.
inline CounterfactualEstimate estimate_counterfactuals(const CounterfactualModel& model,
                                                       const ConsumptionSeries& observed,
                                                       const std::vector<std::size_t>& targets) {
  CounterfactualEstimate out;
  if (targets.empty()) return out;
  if (observed.start() != model.train_start)
    throw std::invalid_argument("observed series must start at the training window start");
  std::vector<char> is_target(observed.size(), 0);
  for (const std::size_t i : targets) {
    if (i >= observed.size()) throw std::invalid_argument("target index outside series");
    if (observed.samples[i].t <= model.train_end)
      throw std::invalid_argument("training window overlaps target indices");
    is_target[i] = 1;
  }

  std::map<std::size_t, std::pair<double, int>> results;
  HmmFilter filter_state(model.hmm);
  const std::size_t post_begin = static_cast<std::size_t>(model.train_end + 1 - observed.start());
  if (model.with_latent) {
    for (std::size_t i = 0; i < post_begin; ++i)
      filter_state.absorb(observed.samples[i].consumption);
  }
  for (std::size_t i = post_begin; i < observed.size(); ++i) {
    std::optional<int> label;
    if (model.with_latent) label = latent_label(filter_state.predicted(), model.space);
    if (is_target[i]) {
      const Eigen::VectorXd x = build_covariates(observed, observed.samples[i].t, label);
      results[i] = {quantize_outcome(model.regressor.predict(x)), label ? *label : -1};
    }
    if (model.with_latent) filter_state.absorb(observed.samples[i].consumption);
  }

  out.y0_hat.reserve(targets.size());
  out.latent.reserve(targets.size());
  for (const std::size_t i : targets) {
    out.y0_hat.push_back(results.at(i).first);
    out.latent.push_back(results.at(i).second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and error summaries

struct Aggregates {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double p10 = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double p90 = 0.0;
};

inline Aggregates aggregate(const std::vector<double>& values) {
  Aggregates a;
  a.count = values.size();
  if (values.empty()) return a;
  a.mean = mean(values);
  a.median = quantile(values, 0.5);
  a.p10 = quantile(values, 0.10);
  a.p25 = quantile(values, 0.25);
  a.p75 = quantile(values, 0.75);
  a.p90 = quantile(values, 0.90);
  return a;
}

struct ReductionPoint {
  std::size_t index = 0;
  HourStamp t = 0;
  int hour = 0;
  int latent = -1;
  bool automation = false;
  bool placebo = false;
  double y_obs = 0.0;
  double y0_hat = 0.0;
  double reduction = 0.0;  // y0_hat - y_obs; positive means reduced consumption
};

struct ReductionEstimate {
  std::vector<ReductionPoint> points;

  std::vector<double> reductions() const {
    std::vector<double> v;
    v.reserve(points.size());
    for (const ReductionPoint& p : points) v.push_back(p.reduction);
    return v;
  }

  Aggregates aggregates() const { return aggregate(reductions()); }
};

// Pointwise estimated reduction yhat_delta = yhat0 - y1.
inline std::vector<double> estimate_reduction(const std::vector<double>& y0_hat,
                                              const std::vector<double>& y1) {
  if (y0_hat.size() != y1.size())
    throw std::invalid_argument("estimate_reduction: misaligned vectors");
  std::vector<double> out(y0_hat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y0_hat[i] - y1[i];
  return out;
}

struct ErrorSummary {
  std::vector<double> errors;  // yhat_delta - y_delta, equivalently yhat0 - y0
  double bias = 0.0;
  double variance = 0.0;  // n-1 denominator; 0 when fewer than 2 errors
};

// Eventwise error of the estimated reduction against the injected truth.
inline ErrorSummary eventwise_error(const std::vector<double>& estimated_reduction,
                                    const SemiSyntheticSet& truth) {
  if (estimated_reduction.size() != truth.treated.size())
    throw std::invalid_argument("eventwise_error: misaligned vectors");
  ErrorSummary summary;
  summary.errors.resize(estimated_reduction.size());
  for (std::size_t i = 0; i < estimated_reduction.size(); ++i)
    summary.errors[i] = estimated_reduction[i] - (truth.y0[i] - truth.y1[i]);
  if (!summary.errors.empty()) summary.bias = mean(summary.errors);
  if (summary.errors.size() >= 2) summary.variance = sample_variance(summary.errors);
  return summary;
}

enum class GroupDim { kHour, kLatent, kAutomation, kPlacebo };

// Per-group aggregates of the pointwise reductions, keyed by the selected
// label dimensions. Groups simply absent from the data yield no entry.
inline std::map<std::string, Aggregates> conditional_summary(
    const ReductionEstimate& estimate, const std::vector<GroupDim>& group_by) {
  std::map<std::string, std::vector<double>> groups;
  for (const ReductionPoint& p : estimate.points) {
    std::string key;
    for (const GroupDim dim : group_by) {
      if (!key.empty()) key += "|";
      switch (dim) {
        case GroupDim::kHour: key += "hour=" + std::to_string(p.hour); break;
        case GroupDim::kLatent: key += "latent=" + std::to_string(p.latent); break;
        case GroupDim::kAutomation: key += "automation=" + std::to_string(p.automation); break;
        case GroupDim::kPlacebo: key += "placebo=" + std::to_string(p.placebo); break;
      }
    }
    if (key.empty()) key = "all";
    groups[key].push_back(p.reduction);
  }
  std::map<std::string, Aggregates> out;
  for (const auto& [key, values] : groups) out[key] = aggregate(values);
  return out;
}

}  // namespace drcast
