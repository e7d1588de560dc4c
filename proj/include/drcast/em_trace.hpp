#pragma once

#include <string>
#include <vector>

namespace drcast {

// Per-iteration log-likelihood of the observed data, recorded after every
// M-step (plus the initial value). Exact EM makes this non-decreasing, which
// the test suite checks with a small slack.
struct EmTrace {
  std::vector<double> log_likelihood;
  bool converged = false;
  int iterations = 0;  // number of M-steps performed
  std::vector<std::string> warnings;
};

}  // namespace drcast
