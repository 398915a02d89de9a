#pragma once

#include <string>
#include <vector>

#include "ppl/analysis.hpp"
#include "ppl/cfg.hpp"

namespace ppl {

// A sub-CFG sliced for one factor (Appendix D.1) or for SMC continuation
// (Appendix D.6). Holds node ids and roles only; execution goes through the
// base CFG with a SliceView.
struct SlicedProgram {
  int k = -1;        // factor index; -1 for SMC slices and the entry slice
  int origin = -1;   // N_k node id; cfg.start for the SMC entry slice
  bool smc = false;
  bool plain_reach = false;  // carrier-liveness fallback was taken
  SliceView view;

  bool retained(int node) const { return view.retained[static_cast<size_t>(node)] != 0; }
  SampleRole role_of(int node) const { return view.role[static_cast<size_t>(node)]; }
  std::vector<int> nodes_with_role(const Cfg& g, SampleRole r) const;
};

// Appendix D.1: retain nodes on paths from N_k to a dependent N_j that do
// not revisit N_k in their interior; dependents keep sample semantics
// (score), the origin is the visit, other retained samples become reads.
SlicedProgram slice_for_factor(const Cfg& g, const Analysis& an, int k);

// Appendix D.6: retain nodes on sample-free paths from N_k to the next
// sample node; every further sample node pauses execution.
// origin_node == -1 builds the synthetic entry slice from Start.
SlicedProgram slice_for_smc(const Cfg& g, int origin_node);

CfgExecResult run_slice(const Cfg& g, const SlicedProgram& sp, ProgramState checkpoint,
                        SampleHandler& handler, uint64_t step_budget = kDefaultStepBudget);

std::string slice_dump(const Cfg& g, const SlicedProgram& sp);
std::string slice_to_dot(const Cfg& g, const SlicedProgram& sp);

}  // namespace ppl
