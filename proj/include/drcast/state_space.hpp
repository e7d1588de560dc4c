#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace drcast {

enum class HourLevel { kSingle, kHigh, kLow };

struct HourState {
  int hour = 0;
  HourLevel level = HourLevel::kSingle;
};

inline constexpr int kDualHourBegin = 6;   // first hour with High/Low split
inline constexpr int kDualHourEnd = 20;    // exclusive; 6:00-20:00 window
inline constexpr int kHourlyStateCount = 38;

inline bool is_dual_hour(int hour) { return hour >= kDualHourBegin && hour < kDualHourEnd; }

// The cyclic hour-of-day state space: two states (High, Low) for each hour
// in the 6:00-20:00 window, one state for every other hour. Transitions are
// only allowed from hour h to hour (h+1) mod 24.
struct StateSpace {
  std::vector<HourState> states;
  std::vector<std::vector<int>> by_hour;  // 24 entries; {single} or {high, low}

  int state_count() const { return static_cast<int>(states.size()); }

  bool transition_allowed(int from, int to) const {
    return states[static_cast<std::size_t>(to)].hour ==
           (states[static_cast<std::size_t>(from)].hour + 1) % 24;
  }

  const std::vector<int>& states_of_hour(int hour) const {
    return by_hour[static_cast<std::size_t>(hour)];
  }

  int high_state(int hour) const { return by_hour[static_cast<std::size_t>(hour)][0]; }
  int low_state(int hour) const { return by_hour[static_cast<std::size_t>(hour)][1]; }
};

// Canonical ordering: hours ascending, High before Low.
inline StateSpace build_state_space() {
  StateSpace space;
  space.by_hour.resize(24);
  for (int hour = 0; hour < 24; ++hour) {
    if (is_dual_hour(hour)) {
      space.by_hour[static_cast<std::size_t>(hour)] = {space.state_count(),
                                                       space.state_count() + 1};
      space.states.push_back(HourState{hour, HourLevel::kHigh});
      space.states.push_back(HourState{hour, HourLevel::kLow});
    } else {
      space.by_hour[static_cast<std::size_t>(hour)] = {space.state_count()};
      space.states.push_back(HourState{hour, HourLevel::kSingle});
    }
  }
  return space;
}

// Rounds a state distribution to the binary label fed into the covariates:
// 1 iff the High state of the active hour carries at least half the mass
// (single-state hours are always 1). The distribution must sit on a single
// hour, as any output of the cyclic chain does.
inline int latent_label(const Eigen::VectorXd& distribution, const StateSpace& space) {
  if (distribution.size() != space.state_count())
    throw std::invalid_argument("distribution length does not match state space");
  int active_hour = -1;
  double active_mass = -1.0;
  std::vector<double> hour_mass(24, 0.0);
  for (int i = 0; i < space.state_count(); ++i)
    hour_mass[static_cast<std::size_t>(space.states[static_cast<std::size_t>(i)].hour)] +=
        distribution(i);
  for (int hour = 0; hour < 24; ++hour) {
    if (hour_mass[static_cast<std::size_t>(hour)] > active_mass) {
      active_mass = hour_mass[static_cast<std::size_t>(hour)];
      active_hour = hour;
    }
  }
  for (int hour = 0; hour < 24; ++hour) {
    if (hour != active_hour && hour_mass[static_cast<std::size_t>(hour)] > 1e-6)
      throw std::runtime_error("state distribution spreads over several hours");
  }
  if (!is_dual_hour(active_hour)) return 1;
  return distribution(space.high_state(active_hour)) >= 0.5 ? 1 : 0;
}

}  // namespace drcast
