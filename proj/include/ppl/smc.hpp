#pragma once

#include <string>
#include <vector>

#include "ppl/model.hpp"

namespace ppl {

struct SmcStep {
  int t = 0;
  double ess = 0.0;
  double log_z = 0.0;                // cumulative estimate after this step
  std::vector<double> weights;       // per-particle log-weight increments
  std::vector<int> ancestors;        // resampling outcome
};

struct SmcResult {
  bool ok = false;
  std::string error;
  std::vector<SmcStep> steps;
  double log_z = 0.0;
  std::vector<Trace> traces;         // final particle traces
  double wall_seconds = 0.0;
};

// Sequential Monte Carlo over the model's data schedule (p_t = program with
// the size variable set to t). naive: every step re-executes the truncated
// program from scratch. iterative: particles advance sample-node to
// sample-node through the SMC slices, carrying checkpoints. Under one seed
// both variants produce identical per-step weights, ancestors and traces.
SmcResult smc_run(const Model& m, bool iterative, int particles, uint64_t seed,
                  int threads = 1);

}  // namespace ppl
