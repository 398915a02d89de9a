#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ppl/ast.hpp"
#include "ppl/interp.hpp"

namespace ppl {

struct CfgNode {
  enum class Kind { Start, End, Assign, Sample, Branch, Join };

  int id = -1;
  Kind kind = Kind::Start;
  int var_slot = -1;          // Assign / Sample
  std::string var_name;
  Expr expr;                  // Assign rhs, Branch condition
  SampleData sample;          // Sample
  int line = 0;

  // Branch: succ[0] = consequent, succ[1] = alternative. Others: succ[0].
  int succ[2] = {-1, -1};
  std::vector<int> preds;

  bool is_sample() const { return kind == Kind::Sample; }
  bool is_branch() const { return kind == Kind::Branch; }
  bool is_def() const { return kind == Kind::Assign || kind == Kind::Sample; }
};

struct BranchJoinPair {
  int branch = -1;
  int join = -1;
  bool is_loop = false;
};

struct Dataflow;

// Control-flow graph per the Appendix A translation. Node ids follow
// translation order (Start is 0, End is last), stable across runs.
struct Cfg {
  std::vector<CfgNode> nodes;
  int start = 0;
  int end = -1;
  std::vector<BranchJoinPair> pairs;
  SymbolTable syms;

  const CfgNode& node(int id) const { return nodes[static_cast<size_t>(id)]; }
  int pair_of_branch(int branch_id) const;
  std::vector<int> sample_nodes() const;
  size_t edge_count() const;

  const Dataflow& dataflow() const;  // memoised RD/BP fixpoints
  std::string statement_text(int id) const;

  Cfg() = default;
  Cfg(Cfg&&) = default;
  Cfg& operator=(Cfg&&) = default;

private:
  mutable std::shared_ptr<const Dataflow> df_;
};

struct Dataflow {
  // rd[node][var] = set of defining node ids reaching the node's entry.
  std::vector<std::vector<std::set<int>>> rd;
  // bp[node] = branch parents.
  std::vector<std::set<int>> bp;
  // live[node] = variables whose entry value may still be read downstream.
  std::vector<std::set<int>> live;
};

Cfg build_cfg(const Program& p);

std::vector<int> reaching_definitions(const Cfg& g, int node, int var_slot);
std::vector<int> branch_parents(const Cfg& g, int node);

// Slice structure over a base CFG (built by the slicer module). Execution
// leaves through End whenever the successor is not retained.
struct SliceView {
  int origin = -1;                    // entry node (N_k); cfg.start for SMC entry slices
  std::vector<char> retained;
  std::vector<SampleRole> role;       // static role per retained sample node
  bool smc = false;                   // pause on reaching any further sample node
};

// Loop-iteration coordinate of a node occurrence: (pair index, iteration)
// for each enclosing while loop. Identifies the unrolled-CFG copy.
using LoopCoord = std::vector<std::pair<int, int>>;

struct CfgExecOptions {
  uint64_t step_budget = kDefaultStepBudget;
  bool record_sequence = false;
  bool record_coords = false;   // loop-iteration coordinates per occurrence
  bool record_states = false;   // pre-execution state per occurrence
  const SliceView* slice = nullptr;
};

struct CfgExecResult {
  bool ok = false;
  UndefReason reason = UndefReason::None;
  ProgramState state;
  bool paused = false;   // SMC slices: stopped before executing `paused_node`
  int paused_node = -1;
  std::vector<int> sequence;          // visited node ids (if recorded)
  std::vector<LoopCoord> coords;      // parallel to sequence (if recorded)
  std::vector<ProgramState> states;   // parallel to sequence (if recorded)

  bool undefined() const { return !ok && !paused; }
};

CfgExecResult cfg_exec(const Cfg& g, ProgramState st, SampleHandler& handler,
                       const CfgExecOptions& opts = {});
CfgExecResult cfg_exec(const Cfg& g, const Trace& tr, ProgramState st,
                       const CfgExecOptions& opts = {});

std::string cfg_to_dot(const Cfg& g);

}  // namespace ppl
