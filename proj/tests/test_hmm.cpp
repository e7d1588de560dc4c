#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "drcast/hmm.hpp"
#include "drcast/state_space.hpp"
#include "drcast/stats.hpp"
#include "support/hmm_oracle.hpp"
#include "support/synthetic.hpp"

using namespace drcast;

namespace {

HmmModel single_state_chain(double mu, double var) {
  return HmmModel::unmasked(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, mu),
                            Eigen::VectorXd::Constant(1, var), Eigen::VectorXd::Ones(1));
}

}  // namespace

// ---------------------------------------------------------------------------
// State space

TEST_CASE("the hourly state space has 38 states in canonical order") {
  const StateSpace space = build_state_space();
  CHECK(space.state_count() == 38);
  int duals = 0, singles = 0;
  for (int hour = 0; hour < 24; ++hour) {
    const auto& states = space.states_of_hour(hour);
    if (is_dual_hour(hour)) {
      REQUIRE(states.size() == 2);
      CHECK(space.states[static_cast<std::size_t>(states[0])].level == HourLevel::kHigh);
      CHECK(space.states[static_cast<std::size_t>(states[1])].level == HourLevel::kLow);
      ++duals;
    } else {
      REQUIRE(states.size() == 1);
      CHECK(space.states[static_cast<std::size_t>(states[0])].level == HourLevel::kSingle);
      ++singles;
    }
  }
  CHECK(duals == 14);
  CHECK(singles == 10);
}

TEST_CASE("transitions connect each hour only to the next hour") {
  const StateSpace space = build_state_space();
  // hour 5 feeds exactly the two hour-6 states
  const int s5 = space.states_of_hour(5)[0];
  for (int j = 0; j < space.state_count(); ++j) {
    const bool allowed = space.transition_allowed(s5, j);
    const bool is_hour6 = space.states[static_cast<std::size_t>(j)].hour == 6;
    CHECK(allowed == is_hour6);
  }
  // hour 23 wraps to hour 0
  const int s23 = space.states_of_hour(23)[0];
  for (int j = 0; j < space.state_count(); ++j) {
    CHECK(space.transition_allowed(s23, j) ==
          (space.states[static_cast<std::size_t>(j)].hour == 0));
  }
}

// ---------------------------------------------------------------------------
// Initialization

TEST_CASE("init_params needs seven full days") {
  const StateSpace space = build_state_space();
  std::vector<double> too_short(100, 0.5);
  CHECK_THROWS_AS(init_params(testing::series_from_values(too_short), space, 1),
                  std::invalid_argument);
}

TEST_CASE("init_params on a constant series floors the variance") {
  const StateSpace space = build_state_space();
  std::vector<double> values(24 * 8, 0.4);
  const HmmModel model = init_params(testing::series_from_values(values), space, 1);
  for (int i = 0; i < model.states(); ++i) {
    CHECK(model.mean(i) == Catch::Approx(0.4));
    CHECK(model.variance(i) == kHmmVarianceFloor);
  }
}

TEST_CASE("init_params splits dual hours at the quartiles") {
  const StateSpace space = build_state_space();
  std::vector<double> values;
  for (int day = 0; day < 10; ++day)
    for (int hour = 0; hour < 24; ++hour)
      values.push_back(hour == 10 ? (day % 2 ? 0.8 : 0.2) : 0.5);
  const HmmModel model = init_params(testing::series_from_values(values), space, 1);
  CHECK(model.mean(space.high_state(10)) == Catch::Approx(0.8).margin(0.01));
  CHECK(model.mean(space.low_state(10)) == Catch::Approx(0.2).margin(0.01));
  for (int i = 0; i < model.states(); ++i)
    CHECK(model.transition.row(i).sum() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("initial distribution is a point mass on the first observed hour") {
  const StateSpace space = build_state_space();
  std::vector<double> values(24 * 8, 0.3);
  // start at 14:00
  const auto series = testing::series_from_values(values, 14);
  const HmmModel model = init_params(series, space, 1);
  CHECK(model.initial.sum() == Catch::Approx(1.0));
  for (int i = 0; i < model.states(); ++i) {
    if (model.initial(i) > 0)
      CHECK(space.states[static_cast<std::size_t>(i)].hour == 14);
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

TEST_CASE("single-state chain log-likelihood is the sum of emission densities") {
  const HmmModel model = single_state_chain(0.3, 0.04);
  const std::vector<double> y{0.1, 0.5, 0.2, 0.4};
  const ForwardTable fwd = forward(model, y);
  double expected = 0.0;
  for (const double v : y) expected += gaussian_log_pdf(v, 0.3, 0.04);
  CHECK(fwd.log_likelihood == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("uninformative emissions propagate the prior through the chain") {
  Eigen::MatrixXd a(2, 2);
  a << 0.9, 0.1, 0.3, 0.7;
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(2, 0.5);
  const Eigen::VectorXd var = Eigen::VectorXd::Constant(2, 0.2);
  Eigen::VectorXd pi(2);
  pi << 0.6, 0.4;
  const HmmModel model = HmmModel::unmasked(a, mu, var, pi);
  const std::vector<double> y{0.5, 0.5, 0.5};
  const ForwardTable fwd = forward(model, y);
  Eigen::VectorXd chain = pi;
  for (int t = 0; t <= 2; ++t) {
    CHECK(fwd.predicted(t, 0) == Catch::Approx(chain(0)).margin(1e-12));
    chain = a.transpose() * chain;
  }
}

TEST_CASE("backward table starts from ones") {
  const HmmModel model = testing::random_chain(5, 3, false);
  const auto y = testing::random_observations(6, 5);
  const BackwardTable bwd = backward(model, y);
  for (int i = 0; i < 3; ++i) CHECK(bwd.scaled(4, i) == 1.0);
}

TEST_CASE("forward and filter agree with the enumeration oracle on a tiny fixture") {
  const HmmModel model = testing::random_chain(7, 2, false);
  const std::vector<double> y{0.2, 0.8, 0.4};
  const auto oracle = testing::enumerate_hmm(model, y);
  const ForwardTable fwd = forward(model, y);
  CHECK(fwd.log_likelihood == Catch::Approx(std::log(oracle.probability)).margin(1e-10));
  const Eigen::VectorXd filtered = filter(model, y);
  for (int i = 0; i < 2; ++i)
    CHECK(filtered(i) == Catch::Approx(oracle.marginals(2, i)).margin(1e-10));
}

// ---------------------------------------------------------------------------
// Posteriors

TEST_CASE("posterior marginals and pairwise tables match the oracle") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int m = 2 + static_cast<int>(seed % 3);
    const int t_len = 3 + static_cast<int>(seed % 5);
    const HmmModel model = testing::random_chain(seed, m, seed % 2 == 0);
    const auto y = testing::random_observations(seed + 1000, t_len);
    const auto oracle = testing::enumerate_hmm(model, y);
    const PosteriorTable post = posteriors(model, y, true);

    CHECK(post.log_likelihood == Catch::Approx(std::log(oracle.probability)).margin(1e-9));
    for (int t = 0; t < t_len; ++t) {
      CHECK(post.marginals.row(t).sum() == Catch::Approx(1.0).margin(1e-10));
      for (int i = 0; i < m; ++i)
        CHECK(post.marginals(t, i) == Catch::Approx(oracle.marginals(t, i)).margin(1e-9));
    }
    for (int t = 0; t + 1 < t_len; ++t) {
      for (int i = 0; i < m; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < m; ++j) {
          CHECK(post.pairwise[static_cast<std::size_t>(t)](i, j) ==
                Catch::Approx(oracle.pairwise[static_cast<std::size_t>(t)](i, j)).margin(1e-9));
          row_sum += post.pairwise[static_cast<std::size_t>(t)](i, j);
        }
        // pairwise tables marginalize back to the time-t marginal
        CHECK(row_sum == Catch::Approx(post.marginals(t, i)).margin(1e-9));
      }
    }
  }
}

TEST_CASE("forward-backward consistency: every time slice reproduces P(Y)") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const HmmModel model = testing::random_chain(seed + 50, 4, false);
    const auto y = testing::random_observations(seed + 60, 40);
    const PosteriorTable post = posteriors(model, y);
    for (Eigen::Index t = 0; t < post.marginals.rows(); ++t)
      CHECK(std::abs(post.marginals.row(t).sum() - 1.0) <= 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Baum-Welch

TEST_CASE("baum-welch on a single-state chain gives the sample moments") {
  const HmmModel model = single_state_chain(0.0, 1.0);
  const std::vector<double> y{0.2, 0.6, 0.7, 0.1};
  const PosteriorTable post = posteriors(model, y);
  const BaumWelchResult step = baum_welch_step(model, y, post);
  const double mu = (0.2 + 0.6 + 0.7 + 0.1) / 4.0;
  double var = 0.0;
  for (const double v : y) var += (v - mu) * (v - mu);
  var /= 4.0;
  CHECK(step.model.mean(0) == Catch::Approx(mu).margin(1e-12));
  CHECK(step.model.variance(0) == Catch::Approx(var).margin(1e-12));
  CHECK(step.model.transition(0, 0) == 1.0);
}

TEST_CASE("baum-welch updates match hand evaluation on oracle posteriors") {
  const HmmModel model = testing::random_chain(77, 2, false);
  const std::vector<double> y{0.3, 0.7, 0.5};
  const auto oracle = testing::enumerate_hmm(model, y);
  const PosteriorTable post = posteriors(model, y, true);
  const BaumWelchResult step = baum_welch_step(model, y, post);

  // pi_hat = P(q_0 | Y)
  for (int i = 0; i < 2; ++i)
    CHECK(step.model.initial(i) == Catch::Approx(oracle.marginals(0, i)).margin(1e-9));
  // a_hat from summed pairwise posteriors
  for (int i = 0; i < 2; ++i) {
    double denom = 0.0;
    for (int t = 0; t < 2; ++t)
      for (int j = 0; j < 2; ++j) denom += oracle.pairwise[static_cast<std::size_t>(t)](i, j);
    for (int j = 0; j < 2; ++j) {
      double num = 0.0;
      for (int t = 0; t < 2; ++t) num += oracle.pairwise[static_cast<std::size_t>(t)](i, j);
      CHECK(step.model.transition(i, j) == Catch::Approx(num / denom).margin(1e-9));
    }
  }
  // mu_hat and sigma2_hat from weighted sums over all times
  for (int i = 0; i < 2; ++i) {
    double wsum = 0.0, wy = 0.0;
    for (int t = 0; t < 3; ++t) {
      wsum += oracle.marginals(t, i);
      wy += oracle.marginals(t, i) * y[static_cast<std::size_t>(t)];
    }
    const double mu = wy / wsum;
    double wvar = 0.0;
    for (int t = 0; t < 3; ++t)
      wvar += oracle.marginals(t, i) * (y[static_cast<std::size_t>(t)] - mu) *
              (y[static_cast<std::size_t>(t)] - mu);
    CHECK(step.model.mean(i) == Catch::Approx(mu).margin(1e-9));
    CHECK(step.model.variance(i) == Catch::Approx(wvar / wsum).margin(1e-9));
  }
}

TEST_CASE("masked transitions stay exactly zero through EM") {
  const StateSpace space = build_state_space();
  const HmmModel truth = testing::known_hourly_model(space);
  const ConsumptionSeries sim = testing::sample_from_model(truth, space, 24 * 10, 3);
  std::vector<double> y;
  for (const Sample& s : sim.samples) y.push_back(s.consumption);

  HmmModel model = init_params(sim, space, 9);
  for (int it = 0; it < 3; ++it) {
    const PosteriorTable post = posteriors(model, y);
    model = baum_welch_step(model, y, post).model;
    for (int i = 0; i < model.states(); ++i) {
      double row = 0.0;
      for (int j = 0; j < model.states(); ++j) {
        if (!model.allowed(i, j)) CHECK(model.transition(i, j) == 0.0);
        row += model.transition(i, j);
      }
      CHECK(row == Catch::Approx(1.0).margin(1e-10));
    }
  }
}

TEST_CASE("states with no posterior mass keep their parameters and are flagged") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.0, 0.0, 1.0;
  Eigen::VectorXd mu(2), var(2), pi(2);
  mu << 0.2, 0.9;
  var << 0.01, 0.05;
  pi << 1.0, 0.0;  // state 1 unreachable
  HmmModel model = HmmModel::unmasked(a, mu, var, pi);
  model.allowed << 1, 0, 0, 1;
  model.transition = a;
  const std::vector<double> y{0.21, 0.19, 0.2};
  const PosteriorTable post = posteriors(model, y);
  const BaumWelchResult step = baum_welch_step(model, y, post);
  REQUIRE(step.held_states.size() == 1);
  CHECK(step.held_states[0] == 1);
  CHECK(step.model.mean(1) == 0.9);
  CHECK(step.model.variance(1) == 0.05);
}

// ---------------------------------------------------------------------------
// Full fits

TEST_CASE("fit_hmm trace is monotone and converges on simulated data") {
  const StateSpace space = build_state_space();
  const HmmModel truth = testing::known_hourly_model(space);
  const ConsumptionSeries sim = testing::sample_from_model(truth, space, 24 * 20, 11);
  const auto [model, trace] = fit_hmm(sim, 1e-6, 200, 4);
  CHECK(trace.converged);
  for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
    CHECK(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-9);
}

TEST_CASE("fit_hmm recovers a well-separated generator") {
  const StateSpace space = build_state_space();
  const HmmModel truth = testing::known_hourly_model(space, 0.8, 0.2, 0.0025, 0.8);
  const ConsumptionSeries sim = testing::sample_from_model(truth, space, 24 * 60, 21);
  const auto [model, trace] = fit_hmm(sim, 1e-6, 300, 2);

  for (int hour = kDualHourBegin; hour < kDualHourEnd; ++hour) {
    const double a = model.mean(space.high_state(hour));
    const double b = model.mean(space.low_state(hour));
    const double hi = std::max(a, b), lo = std::min(a, b);
    CHECK(hi == Catch::Approx(0.8).margin(0.05));
    CHECK(lo == Catch::Approx(0.2).margin(0.05));
  }

  // same-type transitions dominate cross-type ones on persistent data
  int same_gt_cross = 0, dual_pairs = 0;
  for (int hour = kDualHourBegin; hour + 1 < kDualHourEnd; ++hour) {
    const bool hi_first =
        model.mean(space.high_state(hour)) >= model.mean(space.low_state(hour));
    const int h = hi_first ? space.high_state(hour) : space.low_state(hour);
    const int l = hi_first ? space.low_state(hour) : space.high_state(hour);
    const bool hi_first_next =
        model.mean(space.high_state(hour + 1)) >= model.mean(space.low_state(hour + 1));
    const int hn = hi_first_next ? space.high_state(hour + 1) : space.low_state(hour + 1);
    const int ln = hi_first_next ? space.low_state(hour + 1) : space.high_state(hour + 1);
    ++dual_pairs;
    if (model.transition(h, hn) > model.transition(h, ln) &&
        model.transition(l, ln) > model.transition(l, hn))
      ++same_gt_cross;
  }
  CHECK(same_gt_cross >= dual_pairs - 1);
}

TEST_CASE("huge tolerance stops fit_hmm after one iteration") {
  const StateSpace space = build_state_space();
  const HmmModel truth = testing::known_hourly_model(space);
  const ConsumptionSeries sim = testing::sample_from_model(truth, space, 24 * 8, 31);
  const auto [model, trace] = fit_hmm(sim, 1e12, 100, 1);
  CHECK(trace.converged);
  CHECK(trace.iterations == 1);
}

// ---------------------------------------------------------------------------
// Queries

TEST_CASE("filter, prediction and smoothing match the oracle and sum to one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int m = 2 + static_cast<int>(seed % 3);
    const HmmModel model = testing::random_chain(seed + 300, m, seed % 3 == 0);
    const auto y = testing::random_observations(seed + 400, 6);
    const auto oracle = testing::enumerate_hmm(model, y);

    const Eigen::VectorXd f = filter(model, y);
    const Eigen::VectorXd p = predict_state(model, y);
    CHECK(f.sum() == Catch::Approx(1.0).margin(1e-10));
    CHECK(p.sum() == Catch::Approx(1.0).margin(1e-10));
    for (int i = 0; i < m; ++i) {
      CHECK(f(i) == Catch::Approx(oracle.marginals(5, i)).margin(1e-10));
      CHECK(p(i) == Catch::Approx(oracle.predicted(i)).margin(1e-10));
    }
    for (int t = 0; t < 6; ++t) {
      const Eigen::VectorXd s = smooth(model, y, t);
      for (int i = 0; i < m; ++i)
        CHECK(s(i) == Catch::Approx(oracle.marginals(t, i)).margin(1e-10));
    }
  }
}

TEST_CASE("prediction equals the filtered state pushed through the chain") {
  const HmmModel model = testing::random_chain(91, 3, false);
  const auto y = testing::random_observations(92, 8);
  const Eigen::VectorXd f = filter(model, y);
  const Eigen::VectorXd p = predict_state(model, y);
  const Eigen::VectorXd pushed = model.transition.transpose() * f;
  for (int i = 0; i < 3; ++i) CHECK(p(i) == Catch::Approx(pushed(i)).margin(1e-12));
}

TEST_CASE("smoothing at the last index equals filtering") {
  const HmmModel model = testing::random_chain(95, 3, false);
  const auto y = testing::random_observations(96, 7);
  const Eigen::VectorXd f = filter(model, y);
  const Eigen::VectorXd s = smooth(model, y, 6);
  for (int i = 0; i < 3; ++i) CHECK(s(i) == Catch::Approx(f(i)).margin(1e-12));
  CHECK_THROWS_AS(smooth(model, y, 7), std::out_of_range);
  CHECK_THROWS_AS(smooth(model, y, -1), std::out_of_range);
}

TEST_CASE("filter at the first observation is the rescaled prior emission product") {
  const HmmModel model = testing::random_chain(97, 2, false);
  const std::vector<double> y{0.4};
  const Eigen::VectorXd f = filter(model, y);
  Eigen::Vector2d direct;
  for (int i = 0; i < 2; ++i)
    direct(i) = model.initial(i) * testing::gaussian_pdf(0.4, model.mean(i), model.variance(i));
  direct /= direct.sum();
  for (int i = 0; i < 2; ++i) CHECK(f(i) == Catch::Approx(direct(i)).margin(1e-12));
}

TEST_CASE("incremental filter matches the batch forward pass") {
  const HmmModel model = testing::random_chain(101, 4, true);
  const auto y = testing::random_observations(102, 30);
  const ForwardTable fwd = forward(model, y);
  HmmFilter incremental(model);
  for (const double v : y) incremental.absorb(v);
  CHECK(incremental.log_likelihood() == Catch::Approx(fwd.log_likelihood).margin(1e-12));
  const Eigen::VectorXd p = fwd.predicted.row(fwd.horizon() + 1).transpose();
  for (int i = 0; i < 4; ++i)
    CHECK(incremental.predicted()(i) == Catch::Approx(p(i)).margin(1e-12));
}

TEST_CASE("a dead-end chain reports the failing index") {
  HmmModel model = single_state_chain(0.5, 0.01);
  model.transition(0, 0) = 0.0;  // no outgoing mass
  const std::vector<double> y{0.5, 0.5};
  try {
    forward(model, y);
    FAIL("expected HmmZeroLikelihood");
  } catch (const HmmZeroLikelihood& e) {
    CHECK(e.index == 1);
  }
}

// ---------------------------------------------------------------------------
// Latent labels

TEST_CASE("latent_label rounds dual-hour distributions at one half") {
  const StateSpace space = build_state_space();
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(space.state_count());
  dist(space.high_state(10)) = 0.9;
  dist(space.low_state(10)) = 0.1;
  CHECK(latent_label(dist, space) == 1);

  dist(space.high_state(10)) = 0.5;
  dist(space.low_state(10)) = 0.5;
  CHECK(latent_label(dist, space) == 1);  // boundary goes High

  dist(space.high_state(10)) = 0.49;
  dist(space.low_state(10)) = 0.51;
  CHECK(latent_label(dist, space) == 0);
}

TEST_CASE("single-state hours always label 1") {
  const StateSpace space = build_state_space();
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(space.state_count());
  dist(space.states_of_hour(3)[0]) = 1.0;
  CHECK(latent_label(dist, space) == 1);
}

TEST_CASE("distributions smeared across hours are rejected") {
  const StateSpace space = build_state_space();
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(space.state_count());
  dist(space.states_of_hour(3)[0]) = 0.5;
  dist(space.high_state(10)) = 0.5;
  CHECK_THROWS_AS(latent_label(dist, space), std::runtime_error);
}

// ---------------------------------------------------------------------------
// Serialization

TEST_CASE("hmm model serialization round-trips") {
  const StateSpace space = build_state_space();
  const HmmModel truth = testing::known_hourly_model(space);
  const ConsumptionSeries sim = testing::sample_from_model(truth, space, 24 * 8, 41);
  const auto [model, trace] = fit_hmm(sim, 1e-5, 50, 5);
  nlohmann::json j = model;
  const HmmModel back = j.get<HmmModel>();
  std::vector<double> y;
  for (const Sample& s : sim.samples) y.push_back(s.consumption);
  CHECK(forward(back, y).log_likelihood == forward(model, y).log_likelihood);
  CHECK(back.state_hour == model.state_hour);
  CHECK((back.allowed.array() == model.allowed.array()).all());
}
