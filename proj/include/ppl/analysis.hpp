#pragma once

#include <string>
#include <vector>

#include "ppl/cfg.hpp"

namespace ppl {

// Static provenance (Alg. 1): the set of sample nodes whose addresses may
// contribute to the value of `var_slot` at node entry. Sample nodes stand in
// for their (possibly infinite) address sets.
std::vector<int> prov_node(const Cfg& g, int node, int var_slot);
std::vector<int> prov_expr(const Cfg& g, int node, const Expr& e);

struct FactorSet {
  int k = -1;               // index among sample nodes
  int node = -1;            // CFG node id
  int line = 0;
  std::string addr_pattern;  // constant string, prefix+"*", or "*"
  std::vector<int> data_deps;     // provnode over E_0..E_n
  std::vector<int> control_deps;  // provnode over branch-parent conditions
  std::vector<int> deps;          // {node} + data + control  (A_k, node form)
  std::vector<int> dependents;    // J_k: indices j with this factor in their deps
};

struct Analysis {
  std::vector<int> samples;  // k-index -> node id
  std::vector<FactorSet> factors;

  int index_of_node(int node_id) const {
    for (size_t i = 0; i < samples.size(); ++i)
      if (samples[i] == node_id) return static_cast<int>(i);
    return -1;
  }
};

Analysis analyze(const Cfg& g);

std::string address_pattern(const Expr& addr);

// Log value of one factor p_k on a trace: executes the CFG and accumulates
// log pdf only at occurrences of sample node k (0 when it never executes).
struct FactorValue {
  bool defined = false;
  UndefReason reason = UndefReason::None;
  double log_value = 0.0;
};
FactorValue evaluate_factor(const Cfg& g, const Analysis& an, int k, const Trace& tr,
                            uint64_t step_budget = kDefaultStepBudget);

struct GraphExport {
  enum class Kind { Bayes, Markov };
  Kind kind = Kind::Markov;
  std::vector<std::string> node_labels;
  std::vector<std::pair<int, int>> edges;       // bayes: parent -> child
  std::vector<std::vector<int>> parents;        // bayes, per node
  std::vector<std::vector<int>> cliques;        // markov, one per factor

  int label_index(const std::string& l) const {
    for (size_t i = 0; i < node_labels.size(); ++i)
      if (node_labels[i] == l) return static_cast<int>(i);
    return -1;
  }
};

enum class BayesError { None, NonConstantAddress, DuplicateAddress, CyclicDependency };
const char* bayes_error_name(BayesError e);

// Bayesian-network export for the constant-unique-address fragment.
BayesError to_bayes_net(const Cfg& g, const Analysis& an, GraphExport& out);

// Markov-network export: always succeeds; constant addresses merge into one
// variable, dynamic address expressions stay symbolic (pattern labels).
GraphExport to_markov_net(const Cfg& g, const Analysis& an);

std::string graph_to_dot(const GraphExport& g);
std::string factor_report_json(const Cfg& g, const Analysis& an);

}  // namespace ppl
