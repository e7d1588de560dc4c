#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "drcast/em_trace.hpp"
#include "drcast/rng.hpp"
#include "drcast/series.hpp"
#include "drcast/state_space.hpp"
#include "drcast/stats.hpp"

namespace drcast {

inline constexpr double kHmmVarianceFloor = 1e-6;   // normalized-consumption units
inline constexpr double kHmmVisitCutoff = 1e-12;    // below this a state counts as unvisited

struct HmmZeroLikelihood : std::runtime_error {
  explicit HmmZeroLikelihood(int t)
      : std::runtime_error("observation sequence has zero likelihood at index " +
                           std::to_string(t)),
        index(t) {}
  int index = 0;
};

// Gaussian-emission hidden Markov chain over an arbitrary masked state space.
// The 38-state hour-of-day space is one instance; tests run tiny generic
// chains against an exhaustive-enumeration oracle.
struct HmmModel {
  Eigen::MatrixXd transition;  // M x M, row-stochastic, exactly 0 where masked
  Eigen::VectorXd mean;        // emission mean per state
  Eigen::VectorXd variance;    // emission variance per state (>= floor)
  Eigen::VectorXd initial;     // distribution over the state at t = 0
  Eigen::MatrixXi allowed;     // transition mask (0/1)
  std::vector<int> state_hour; // hour of day per state; empty for generic chains

  int states() const { return static_cast<int>(mean.size()); }

  static HmmModel unmasked(Eigen::MatrixXd a, Eigen::VectorXd mu, Eigen::VectorXd var,
                           Eigen::VectorXd pi) {
    HmmModel m;
    m.allowed = Eigen::MatrixXi::Ones(a.rows(), a.cols());
    m.transition = std::move(a);
    m.mean = std::move(mu);
    m.variance = std::move(var);
    m.initial = std::move(pi);
    return m;
  }
};

// Scaled forward pass. Rows of `predicted` are p_t = P(q_t | y_0..y_{t-1})
// with p_0 = pi, i.e. the paper's alpha normalized by the running scale.
// Emission densities are handled as exp(log_e - shift_t) with the shift taken
// over the reachable states, so small variances cannot underflow the pass;
// contributions more than ~700 nats below the best reachable state flush to
// zero.
struct ForwardTable {
  Eigen::MatrixXd predicted;  // (T+2) x M; last row is the one-step prediction
  Eigen::MatrixXd weights;    // (T+1) x M; shifted emission densities, <= 1
  Eigen::VectorXd denom;      // (T+1); denom_t = p_t . w_t
  Eigen::VectorXd shift;      // (T+1)
  Eigen::VectorXd log_scale;  // (T+1); log c_t = shift_t + log denom_t
  double log_likelihood = 0.0;

  int horizon() const { return static_cast<int>(log_scale.size()) - 1; }  // T

  // P(q_t = i | y_0..y_t)
  Eigen::VectorXd filtered(int t) const {
    return predicted.row(t).cwiseProduct(weights.row(t)).transpose() / denom(t);
  }
};

inline ForwardTable forward(const HmmModel& model, std::span<const double> y) {
  const int m = model.states();
  const int t_max = static_cast<int>(y.size()) - 1;
  if (t_max < 0) throw std::invalid_argument("empty observation sequence");

  ForwardTable fwd;
  fwd.predicted.resize(t_max + 2, m);
  fwd.weights.resize(t_max + 1, m);
  fwd.denom.resize(t_max + 1);
  fwd.shift.resize(t_max + 1);
  fwd.log_scale.resize(t_max + 1);

  Eigen::VectorXd p = model.initial;
  for (int t = 0; t <= t_max; ++t) {
    fwd.predicted.row(t) = p.transpose();
    double shift = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd log_e(m);
    for (int i = 0; i < m; ++i) {
      log_e(i) = gaussian_log_pdf(y[static_cast<std::size_t>(t)], model.mean(i),
                                  model.variance(i));
      if (p(i) > 0.0 && log_e(i) > shift) shift = log_e(i);
    }
    if (!std::isfinite(shift)) throw HmmZeroLikelihood(t);
    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) w(i) = std::exp(std::min(log_e(i) - shift, 0.0));
    const double denom = p.dot(w);
    if (!(denom > 0.0) || !std::isfinite(denom)) throw HmmZeroLikelihood(t);

    fwd.weights.row(t) = w.transpose();
    fwd.denom(t) = denom;
    fwd.shift(t) = shift;
    fwd.log_scale(t) = shift + std::log(denom);
    const Eigen::VectorXd filtered = p.cwiseProduct(w) / denom;
    p = model.transition.transpose() * filtered;
  }
  fwd.predicted.row(t_max + 1) = p.transpose();
  fwd.log_likelihood = fwd.log_scale.sum();
  return fwd;
}

// Scaled backward pass under the forward pass's scale factors; the last row
// is a vector of ones, matching the unscaled recursion's seed.
struct BackwardTable {
  Eigen::MatrixXd scaled;  // (T+1) x M; scaled(t, i) = beta(q_t = i) / prod_{s>t} c_s
};

namespace detail {

inline BackwardTable backward_from(const HmmModel& model, const ForwardTable& fwd) {
  const int t_max = fwd.horizon();
  const int m = model.states();
  BackwardTable bwd;
  bwd.scaled.resize(t_max + 1, m);
  bwd.scaled.row(t_max).setOnes();
  for (int t = t_max - 1; t >= 0; --t) {
    const Eigen::VectorXd v = fwd.weights.row(t + 1)
                                  .cwiseProduct(bwd.scaled.row(t + 1))
                                  .transpose() /
                              fwd.denom(t + 1);
    bwd.scaled.row(t) = (model.transition * v).transpose();
  }
  return bwd;
}

}  // namespace detail

inline BackwardTable backward(const HmmModel& model, std::span<const double> y) {
  return detail::backward_from(model, forward(model, y));
}

// Posterior state marginals and (optionally) pairwise posteriors. The
// pairwise sum over t is always produced; it is what the Baum-Welch update
// consumes.
struct PosteriorTable {
  Eigen::MatrixXd marginals;               // (T+1) x M; P(q_t = i | Y)
  Eigen::MatrixXd pairwise_sum;            // M x M; sum_t P(q_t = i, q_{t+1} = j | Y)
  std::vector<Eigen::MatrixXd> pairwise;   // per-t tables when requested
  double log_likelihood = 0.0;
};

inline PosteriorTable posteriors(const HmmModel& model, std::span<const double> y,
                                 bool with_pairwise = false) {
  const ForwardTable fwd = forward(model, y);
  const BackwardTable bwd = detail::backward_from(model, fwd);
  const int t_max = fwd.horizon();
  const int m = model.states();

  PosteriorTable post;
  post.log_likelihood = fwd.log_likelihood;
  post.marginals.resize(t_max + 1, m);

  // u_t = p_t . w_t / denom_t; gamma_t = u_t o b_t; xi_t = (u_t v_{t+1}^T) o A
  Eigen::MatrixXd u(m, t_max + 1), v(m, t_max + 1);
  for (int t = 0; t <= t_max; ++t) {
    u.col(t) = fwd.predicted.row(t).cwiseProduct(fwd.weights.row(t)).transpose() / fwd.denom(t);
    v.col(t) = fwd.weights.row(t).cwiseProduct(bwd.scaled.row(t)).transpose() / fwd.denom(t);
    post.marginals.row(t) = u.col(t).cwiseProduct(bwd.scaled.row(t).transpose()).transpose();
  }
  if (t_max >= 1) {
    post.pairwise_sum = (u.leftCols(t_max) * v.rightCols(t_max).transpose())
                            .cwiseProduct(model.transition);
  } else {
    post.pairwise_sum = Eigen::MatrixXd::Zero(m, m);
  }
  if (with_pairwise) {
    post.pairwise.reserve(static_cast<std::size_t>(t_max));
    for (int t = 0; t < t_max; ++t)
      post.pairwise.push_back(
          (u.col(t) * v.col(t + 1).transpose()).cwiseProduct(model.transition));
  }
  return post;
}

struct BaumWelchResult {
  HmmModel model;
  std::vector<int> held_states;  // states never visited; parameters kept as-is
};

// One M-step. Masked transitions stay exactly zero; a state with essentially
// no posterior mass keeps its previous parameters and is flagged.
inline BaumWelchResult baum_welch_step(const HmmModel& model, std::span<const double> y,
                                       const PosteriorTable& post) {
  const int m = model.states();
  const int t_max = static_cast<int>(post.marginals.rows()) - 1;
  BaumWelchResult result;
  result.model = model;

  result.model.initial = post.marginals.row(0).transpose();

  const Eigen::VectorXd visit_all = post.marginals.colwise().sum().transpose();
  const Eigen::VectorXd visit_trans = post.pairwise_sum.rowwise().sum();

  for (int i = 0; i < m; ++i) {
    bool held = false;
    if (t_max >= 1) {
      if (visit_trans(i) > kHmmVisitCutoff) {
        for (int j = 0; j < m; ++j)
          result.model.transition(i, j) =
              model.allowed(i, j) ? post.pairwise_sum(i, j) / visit_trans(i) : 0.0;
        const double row_sum = result.model.transition.row(i).sum();
        result.model.transition.row(i) /= row_sum;
      } else {
        held = true;
      }
    }
    if (visit_all(i) > kHmmVisitCutoff) {
      double mu = 0.0;
      for (int t = 0; t <= t_max; ++t) mu += post.marginals(t, i) * y[static_cast<std::size_t>(t)];
      mu /= visit_all(i);
      double var = 0.0;
      for (int t = 0; t <= t_max; ++t) {
        const double d = y[static_cast<std::size_t>(t)] - mu;
        var += post.marginals(t, i) * d * d;
      }
      result.model.mean(i) = mu;
      result.model.variance(i) = std::max(var / visit_all(i), kHmmVarianceFloor);
    } else {
      held = true;
    }
    if (held) result.held_states.push_back(i);
  }
  return result;
}

// Generic EM loop; the trace records log P(Y) after each M-step.
inline std::pair<HmmModel, EmTrace> fit_hmm_model(HmmModel model, std::span<const double> y,
                                                  double tol, int max_iter) {
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  EmTrace trace;
  PosteriorTable post = posteriors(model, y);
  trace.log_likelihood.push_back(post.log_likelihood);
  double ll = post.log_likelihood;
  bool reported_hold = false;
  for (int m = 1; m <= max_iter; ++m) {
    BaumWelchResult step = baum_welch_step(model, y, post);
    model = std::move(step.model);
    if (!step.held_states.empty() && !reported_hold) {
      trace.warnings.push_back("unvisited states held at previous parameters");
      reported_hold = true;
    }
    post = posteriors(model, y);
    trace.log_likelihood.push_back(post.log_likelihood);
    trace.iterations = m;
    const double gain = post.log_likelihood - ll;
    ll = post.log_likelihood;
    if (gain < tol) {
      trace.converged = true;
      break;
    }
  }
  return {std::move(model), std::move(trace)};
}

// Hour-of-day initialization: dual-level hours start at that hour's 75th/25th
// consumption percentiles, single hours at the hourly mean; transition rows
// get a same-type bias of 0.7 plus seeded jitter.
inline HmmModel init_params(const ConsumptionSeries& series, const StateSpace& space,
                            std::uint64_t seed) {
  if (series.size() < 7 * 24)
    throw std::invalid_argument("need at least 7 full days to initialize the hourly chain");
  const int m = space.state_count();

  std::vector<std::vector<double>> by_hour(24);
  for (const Sample& s : series.samples)
    by_hour[static_cast<std::size_t>(hour_of_day(s.t))].push_back(s.consumption);

  HmmModel model;
  model.mean.resize(m);
  model.variance.resize(m);
  model.initial = Eigen::VectorXd::Zero(m);
  model.transition = Eigen::MatrixXd::Zero(m, m);
  model.allowed = Eigen::MatrixXi::Zero(m, m);
  model.state_hour.resize(static_cast<std::size_t>(m));

  for (int hour = 0; hour < 24; ++hour) {
    const auto& values = by_hour[static_cast<std::size_t>(hour)];
    if (values.size() < 2)
      throw std::invalid_argument("hour of day with fewer than 2 observations");
    const double var = std::max(sample_variance(values), kHmmVarianceFloor);
    if (is_dual_hour(hour)) {
      model.mean(space.high_state(hour)) = quantile(values, 0.75);
      model.mean(space.low_state(hour)) = quantile(values, 0.25);
      model.variance(space.high_state(hour)) = var;
      model.variance(space.low_state(hour)) = var;
    } else {
      model.mean(space.states_of_hour(hour)[0]) = mean(values);
      model.variance(space.states_of_hour(hour)[0]) = var;
    }
  }
  for (int i = 0; i < m; ++i)
    model.state_hour[static_cast<std::size_t>(i)] = space.states[static_cast<std::size_t>(i)].hour;

  std::mt19937_64 rng = make_rng(seed);
  for (int i = 0; i < m; ++i) {
    const HourState& from = space.states[static_cast<std::size_t>(i)];
    const auto& targets = space.states_of_hour((from.hour + 1) % 24);
    double row_sum = 0.0;
    for (const int j : targets) {
      const HourState& to = space.states[static_cast<std::size_t>(j)];
      double base = 1.0;
      if (targets.size() == 2) {
        if (from.level == HourLevel::kSingle) {
          base = 0.5;
        } else {
          const bool same_type = (from.level == HourLevel::kHigh) == (to.level == HourLevel::kHigh);
          base = same_type ? 0.7 : 0.3;
        }
      }
      model.allowed(i, j) = 1;
      model.transition(i, j) = base + 0.05 * uniform01(rng);
      row_sum += model.transition(i, j);
    }
    for (const int j : targets) model.transition(i, j) /= row_sum;
  }

  // Point mass on the state of the first observation's hour; for a dual hour
  // the state whose mean is nearest the first reading.
  const int h0 = hour_of_day(series.start());
  const auto& first_states = space.states_of_hour(h0);
  int best = first_states[0];
  for (const int j : first_states) {
    if (std::abs(model.mean(j) - series.samples.front().consumption) <
        std::abs(model.mean(best) - series.samples.front().consumption))
      best = j;
  }
  model.initial(best) = 1.0;
  return model;
}

inline std::pair<HmmModel, EmTrace> fit_hmm(const ConsumptionSeries& series, double tol = 1e-6,
                                            int max_iter = 500, std::uint64_t seed = 0) {
  const StateSpace space = build_state_space();
  HmmModel init = init_params(series, space, seed);
  std::vector<double> y;
  y.reserve(series.size());
  for (const Sample& s : series.samples) y.push_back(s.consumption);
  return fit_hmm_model(std::move(init), y, tol, max_iter);
}

// P(q_T | Y)
inline Eigen::VectorXd filter(const HmmModel& model, std::span<const double> y) {
  const ForwardTable fwd = forward(model, y);
  return fwd.filtered(fwd.horizon());
}

// Online filtered recursion for stepwise prediction: predicted() is the
// one-step distribution P(q_next | observations absorbed so far), which
// before any observation is the initial distribution.
class HmmFilter {
 public:
  explicit HmmFilter(const HmmModel& model) : model_(&model), predicted_(model.initial) {}

  const Eigen::VectorXd& predicted() const { return predicted_; }
  double log_likelihood() const { return log_likelihood_; }
  int absorbed() const { return absorbed_; }

  void absorb(double y) {
    const int m = model_->states();
    double shift = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd log_e(m);
    for (int i = 0; i < m; ++i) {
      log_e(i) = gaussian_log_pdf(y, model_->mean(i), model_->variance(i));
      if (predicted_(i) > 0.0 && log_e(i) > shift) shift = log_e(i);
    }
    if (!std::isfinite(shift)) throw HmmZeroLikelihood(absorbed_);
    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) w(i) = std::exp(std::min(log_e(i) - shift, 0.0));
    const double denom = predicted_.dot(w);
    if (!(denom > 0.0) || !std::isfinite(denom)) throw HmmZeroLikelihood(absorbed_);
    const Eigen::VectorXd filtered = predicted_.cwiseProduct(w) / denom;
    predicted_ = model_->transition.transpose() * filtered;
    log_likelihood_ += shift + std::log(denom);
    ++absorbed_;
  }

 private:
  const HmmModel* model_;
  Eigen::VectorXd predicted_;
  double log_likelihood_ = 0.0;
  int absorbed_ = 0;
};

// P(q_{T+1} | Y): the filtered state pushed once through the chain.
inline Eigen::VectorXd predict_state(const HmmModel& model, std::span<const double> y) {
  const ForwardTable fwd = forward(model, y);
  return fwd.predicted.row(fwd.horizon() + 1).transpose();
}

// P(q_p | Y) for 0 <= p <= T; p = T coincides with filtering.
inline Eigen::VectorXd smooth(const HmmModel& model, std::span<const double> y, int p) {
  if (p < 0 || p >= static_cast<int>(y.size()))
    throw std::out_of_range("smoothing index outside observed range");
  const PosteriorTable post = posteriors(model, y);
  return post.marginals.row(p).transpose();
}

inline void to_json(nlohmann::json& j, const HmmModel& model) {
  const auto matrix = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      rows.emplace_back(m.row(i).begin(), m.row(i).end());
    return rows;
  };
  std::vector<std::vector<int>> mask;
  for (Eigen::Index i = 0; i < model.allowed.rows(); ++i)
    mask.emplace_back(model.allowed.row(i).begin(), model.allowed.row(i).end());
  j = nlohmann::json{
      {"transition", matrix(model.transition)},
      {"mean", std::vector<double>(model.mean.begin(), model.mean.end())},
      {"variance", std::vector<double>(model.variance.begin(), model.variance.end())},
      {"initial", std::vector<double>(model.initial.begin(), model.initial.end())},
      {"allowed", mask},
      {"state_hour", model.state_hour}};
}

inline void from_json(const nlohmann::json& j, HmmModel& model) {
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
  model.transition = matrix(j.at("transition"));
  const auto vec = [&](const char* key) {
    const auto values = j.at(key).get<std::vector<double>>();
    return Eigen::VectorXd(
        Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
  };
  model.mean = vec("mean");
  model.variance = vec("variance");
  model.initial = vec("initial");
  const auto mask = j.at("allowed").get<std::vector<std::vector<int>>>();
  model.allowed.resize(static_cast<Eigen::Index>(mask.size()),
                       static_cast<Eigen::Index>(mask.empty() ? 0 : mask.front().size()));
  for (Eigen::Index i = 0; i < model.allowed.rows(); ++i)
    for (Eigen::Index c = 0; c < model.allowed.cols(); ++c)
      model.allowed(i, c) = mask[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  model.state_hour = j.value("state_hour", std::vector<int>{});
}

}  // namespace drcast
