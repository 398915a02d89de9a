#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"

#include "ppl/analysis.hpp"
#include "ppl/cfg.hpp"
#include "ppl/interp.hpp"
#include "ppl/lmh.hpp"
#include "ppl/model.hpp"
#include "ppl/parser.hpp"

namespace ppl::test {

inline Model model_from_source(const std::string& name, const std::string& src,
                               bool single_occurrence = true) {
  ModelManifest mf;
  mf.name = name;
  mf.single_occurrence = single_occurrence;
  return load_model_source(mf, src, 1);
}

inline Model corpus_model(const std::string& name, uint64_t data_seed = 1, int size = 0) {
  const ModelManifest* mf = find_model(name);
  REQUIRE(mf != nullptr);
  return load_model(*mf, models_dir_default(), data_seed, size);
}

// Names of corpus models, optionally size-reduced for property tests.
inline std::vector<std::pair<std::string, int>> property_corpus() {
  return {
      {"geometric", 0},     {"branching", 0},     {"branching_dyn", 0},
      {"poisson_address", 0}, {"hurricane", 0},   {"fig4", 0},
      {"fig5_program1", 0}, {"fig5_program2", 0}, {"fig5_program3", 0},
      {"gmm_fixed", 20},    {"gmm_variable", 20}, {"hmm", 15},
      {"hmm_unrolled", 0},  {"lda_fixed", 30},    {"linreg", 20},
      {"marsaglia", 10},    {"dirichlet_process", 12}, {"urn", 10},
      {"pedestrian", 0},
  };
}

inline Trace forward_trace(const Model& m, uint64_t seed) {
  Rng rng(Rng::mix(seed, Rng::hash_str("fwdtrace")));
  ForwardResult f = sample_forward(m.prog, rng, &m.observed);
  REQUIRE(f.ok);
  return f.trace;
}

// keys(tr) minus observed addresses, sorted.
inline std::vector<std::string> latent_keys(const Model& m, const Trace& tr) {
  std::vector<std::string> out;
  for (const std::string& k : tr.keys_sorted())
    if (!m.is_observed(k)) out.push_back(k);
  return out;
}

// Minimality predicate of a trace (density defined, nulling any key breaks it).
inline bool is_minimal(const Model& m, const Trace& tr) {
  if (!density(m.prog, tr).defined) return false;
  for (const std::string& k : tr.keys_sorted()) {
    Trace t2 = tr;
    t2.erase(k);
    if (density(m.prog, t2).defined) return false;
  }
  return true;
}

inline bool close(double a, double b, double tol) {
  if (std::isinf(a) && std::isinf(b)) return (a > 0) == (b > 0);
  return std::fabs(a - b) <= tol;
}

// Standard-density run that records which sample node produced each address
// and how often each address was generated.
class AddressRecorder : public SampleHandler {
public:
  explicit AddressRecorder(const Trace& tr) : tr_(tr) {}
  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    const Value& v = tr_.lookup(addr);
    if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    node_of[addr] = site.node_id;
    ++count_of[addr];
    return HandleResult::bind(v);
  }
  std::map<std::string, int> node_of;
  std::map<std::string, int> count_of;

private:
  const Trace& tr_;
};

// Node that generated `addr` in the execution of `tr`; -1 when undefined or
// when the address occurs more than once (single-occurrence violation).
inline int node_of_address(const Model& m, const Trace& tr, const std::string& addr) {
  AddressRecorder rec(tr);
  CfgExecResult r = cfg_exec(m.cfg, ProgramState::initial(m.prog), rec);
  if (!r.ok) return -1;
  auto it = rec.node_of.find(addr);
  if (it == rec.node_of.end()) return -1;
  if (rec.count_of[addr] != 1) return -1;
  return it->second;
}

// Standard-density run capturing the checkpoint (pre-statement state + node)
// of every sample occurrence; flags duplicated addresses.
class CheckpointRecorder : public SampleHandler {
public:
  explicit CheckpointRecorder(const Trace& tr) : tr_(tr) {}
  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    if (ckpts.count(addr)) duplicate.insert(addr);
    ckpts[addr] = Checkpoint{st, site.node_id};
    const Value& v = tr_.lookup(addr);
    if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    return HandleResult::bind(v);
  }
  std::map<std::string, Checkpoint> ckpts;
  std::set<std::string> duplicate;

private:
  const Trace& tr_;
};

// Density semantics for factor slices: visit/score behave like sample
// statements, reads inject the trace value without touching the density.
class SliceDensityHandler : public SampleHandler {
public:
  explicit SliceDensityHandler(const Trace& tr) : tr_(tr) {}
  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    const Value& v = tr_.lookup(addr);
    if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
    if (site.role != SampleRole::Read) {
      st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
      terms.push_back(addr);
    }
    return HandleResult::bind(v);
  }
  std::vector<std::string> terms;

private:
  const Trace& tr_;
};

// LMH-style single-site perturbation at `alpha`, returned as the merged
// trace pair of the Corollary 5.3 proof: each trace is padded with the
// other's extra keys, so the two differ at alpha only, both executions are
// unchanged, and Theorem 5.1 applies directly even when the proposal grew
// or shrank a loop.
inline bool perturb_merged(const Model& m, const Trace& tr, const std::string& alpha,
                           uint64_t seed, Trace& tr1m, Trace& tr2m) {
  Trace prop;
  if (!lmh_forward_proposal(m, tr, alpha, Rng::mix(seed, Rng::hash_str("perturb")), seed,
                            prop))
    return false;
  if (prop.lookup(alpha).equals(tr.lookup(alpha))) return false;
  tr1m = tr;
  tr2m = prop;
  for (auto& [a, v] : prop.entries())
    if (tr1m.lookup(a).is_null()) tr1m.set(a, v);
  for (auto& [a, v] : tr.entries())
    if (tr2m.lookup(a).is_null()) tr2m.set(a, v);
  for (auto& [a, v] : tr1m.entries())
    if (a != alpha && !tr2m.lookup(a).equals(v)) return false;
  return true;
}

}  // namespace ppl::test
