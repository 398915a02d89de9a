#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ppl/model.hpp"

namespace ppl {

struct LmhRecord {
  int iter = 0;
  std::string address;
  double accept_prob = 0.0;
  bool accepted = false;
  bool undefined_proposal = false;
  double log_density = 0.0;
  uint64_t work_nodes = 0;     // executor steps spent on this iteration
  uint64_t work_pdf = 0;       // pdf evaluations spent on this iteration
  int proposed_terms = 0;      // ForwardCtx Delta-Q terms
  int proposed_addresses = 0;  // distinct addresses proposed by ForwardCtx
};

// Single-site Metropolis-Hastings over traces. The baseline re-executes the
// whole program under the LMH kernel semantics in both directions; the
// factored variant runs the per-factor slice under ForwardCtx/BackwardCtx
// from a cached checkpoint. Proposal randomness is keyed by (step, address)
// so both variants draw identical values.
class LmhChain {
public:
  LmhChain(const Model& m, bool factored, uint64_t seed);

  LmhRecord step(int iter);

  const Trace& trace() const { return trace_; }
  double log_density() const { return logp_; }
  const std::vector<std::string>& latent_keys() const { return latents_; }
  bool degraded() const { return degraded_; }
  const std::unordered_map<std::string, Checkpoint>& checkpoints() const { return ckpts_; }

private:
  LmhRecord step_baseline(int iter, const std::string& alpha);
  LmhRecord step_factored(int iter, const std::string& alpha);
  void insert_latent(const std::string& a);
  void erase_latent(const std::string& a);

  const Model& m_;
  bool factored_;
  uint64_t master_;
  Trace trace_;
  std::vector<std::string> latents_;  // sorted, observed excluded
  std::unordered_map<std::string, Checkpoint> ckpts_;
  double logp_ = 0.0;
  bool degraded_ = false;
};

// Forward LMH kernel proposal at `alpha` (Def. D.4): resample at alpha and
// at fresh addresses from the prior, copy the rest. Used by property tests
// and by the chain itself. Returns false when the proposal execution is
// undefined.
bool lmh_forward_proposal(const Model& m, const Trace& cur, const std::string& alpha,
                          uint64_t master, uint64_t step, Trace& out);

}  // namespace ppl
