#pragma once

// Randomized property suites: finite-difference checks of every hand-derived
// gradient, label inference and the analytic recoveries.

#include "glg/numkit.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace glg::selftest {

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;  // largest error seen, in the suite's own measure
  std::string first_failure;
  double seconds = 0.0;

  bool passed() const { return failures == 0 && cases > 0; }
};

// Central-difference tolerance: a coordinate passes when either error is
// below its bound.
struct FdTolerance {
  double relative = 1e-5;
  double absolute = 1e-7;
  double step = 1e-5;
};

struct FdStats {
  long coordinates = 0;
  long failures = 0;
  double worst_relative = 0.0;  // among failing or all coordinates
  std::string first_failure;
};

/// Compares `analytic` with central differences of `f` around `x`, one
/// coordinate at a time. `x` is restored on return.
void fd_compare(num::Matrix& x, const std::function<double()>& f, const num::Matrix& analytic,
                const FdTolerance& tol, const std::string& what, FdStats& stats);

/// Model gradients (parameters, features, normalized and raw adjacency)
/// on `per_config` random instances of each framework and task.
SuiteResult model_gradients(std::uint64_t seed, int per_config);
/// Gradient of the matching objective with respect to the dummy inputs.
SuiteResult matching_gradients(std::uint64_t seed, int per_config);
/// Smoothness regularizer gradients.
SuiteResult regularizer_gradients(std::uint64_t seed, int cases);
SuiteResult label_inference(std::uint64_t seed, int per_task);
/// Aggregated and raw target features from single-node bundles.
SuiteResult node_feature_recovery(std::uint64_t seed, int cases);
/// A~ from known X, X from known A~ and the joint recovery.
SuiteResult node_structure_recovery(std::uint64_t seed, int cases);
/// Graph-task sage chain and its conditioning warning.
SuiteResult graph_structure_recovery(std::uint64_t seed, int cases);

/// All suites at `scale` times their quick size; prints one line per suite.
std::vector<SuiteResult> run_all(std::ostream& out, std::uint64_t seed = 1, int scale = 1);

}  // namespace glg::selftest
