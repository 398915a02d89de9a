#pragma once

#include <map>
#include <string>
#include <vector>

#include "ppl/model.hpp"

namespace ppl {

struct VParamEntry {
  VarFamily fam = VarFamily::None;
  std::vector<double> phi;
  std::vector<double> adam_m, adam_v;  // optimiser state
};

// Mean-field variational parameters; the address set grows lazily as
// addresses are first seen. Ordered map keeps every walk deterministic.
struct VParams {
  std::map<std::string, VParamEntry> entries;
};

struct BbviEstimate {
  std::map<std::string, std::vector<double>> grad;      // mean over samples
  std::map<std::string, std::vector<double>> variance;  // per component, across samples
  double elbo = 0.0;
  double avg_variance = 0.0;  // averaged over all parameter components
  int n_samples = 0;
};

// Score-function gradient estimate of the ELBO. rao=false is the standard
// estimator (full log p - log Q weight); rao=true runs the per-factor slice
// under BBVICtx so each parameter only sees its Markov-blanket factors.
// threads > 1 uses the OpenMP kernel; results are identical to the serial
// reference for any thread count.
BbviEstimate bbvi_gradient(const Model& m, VParams& params, bool rao, int n_samples,
                           uint64_t master, uint64_t step, int threads = 1);

struct BbviOptimizeResult {
  VParams params;
  std::vector<double> step_avg_variance;
  std::vector<double> step_elbo;
  bool diverged = false;
  std::string diagnostic;
};

// Adam ascent on the chosen estimator (defaults: step 0.05, decay 0.9/0.999).
BbviOptimizeResult bbvi_optimize(const Model& m, bool rao, int steps, int samples_per_step,
                                 uint64_t seed, double lr = 0.05, int threads = 1);

}  // namespace ppl
