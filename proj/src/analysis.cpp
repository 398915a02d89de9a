#include "ppl/analysis.hpp"

#include <algorithm>
#include <deque>

#include "json.hpp"
#include "ppl/parser.hpp"

namespace ppl {

namespace {

// FIFO worklist over (node, var) marks; the result is order-independent.
void prov_worklist(const Cfg& g, std::deque<std::pair<int, int>> init, std::set<int>& result) {
  int nvars = g.syms.size();
  std::vector<char> marked(g.nodes.size() * static_cast<size_t>(nvars), 0);
  auto mark = [&](int node, int var) -> bool {
    char& m = marked[static_cast<size_t>(node) * static_cast<size_t>(nvars) +
                     static_cast<size_t>(var)];
    if (m) return false;
    m = 1;
    return true;
  };

  std::deque<std::pair<int, int>> queue;
  for (auto& p : init)
    if (mark(p.first, p.second)) queue.push_back(p);

  const Dataflow& df = g.dataflow();
  while (!queue.empty()) {
    auto [node, var] = queue.front();
    queue.pop_front();
    for (int d : df.rd[static_cast<size_t>(node)][static_cast<size_t>(var)]) {
      const CfgNode& def = g.node(d);
      const Expr* carried = nullptr;
      if (def.kind == CfgNode::Kind::Sample) {
        result.insert(d);
        carried = &def.sample.addr;  // E_0
      } else {
        carried = &def.expr;
      }
      for (int y : free_vars(*carried))
        if (mark(d, y)) queue.push_back({d, y});
      for (int bp : df.bp[static_cast<size_t>(d)]) {
        const CfgNode& bn = g.node(bp);
        for (int y : free_vars(bn.expr))
          if (mark(bp, y)) queue.push_back({bp, y});
      }
    }
  }
}

}  // namespace

std::vector<int> prov_node(const Cfg& g, int node, int var_slot) {
  std::set<int> result;
  prov_worklist(g, {{node, var_slot}}, result);
  return std::vector<int>(result.begin(), result.end());
}

std::vector<int> prov_expr(const Cfg& g, int node, const Expr& e) {
  std::deque<std::pair<int, int>> init;
  for (int y : free_vars(e)) init.push_back({node, y});
  std::set<int> result;
  prov_worklist(g, std::move(init), result);
  return std::vector<int>(result.begin(), result.end());
}

std::string address_pattern(const Expr& addr) {
  if (addr.kind == Expr::Kind::Const && addr.cval.is_str()) return addr.cval.as_str();
  // Concatenation chains rooted at a constant string print as prefix + "*".
  const Expr* e = &addr;
  while (e->kind == Expr::Kind::Call && e->fn == "+" && !e->args.empty()) e = &e->args[0];
  if (e->kind == Expr::Kind::Const && e->cval.is_str()) return e->cval.as_str() + "*";
  return "*";
}

Analysis analyze(const Cfg& g) {
  Analysis an;
  an.samples = g.sample_nodes();
  const Dataflow& df = g.dataflow();
  for (size_t k = 0; k < an.samples.size(); ++k) {
    int node = an.samples[k];
    const CfgNode& n = g.node(node);
    FactorSet f;
    f.k = static_cast<int>(k);
    f.node = node;
    f.line = n.line;
    f.addr_pattern = address_pattern(n.sample.addr);

    std::set<int> data;
    {
      std::deque<std::pair<int, int>> init;
      for (int y : free_vars(n.sample.addr)) init.push_back({node, y});
      for (const Expr& pe : n.sample.params)
        for (int y : free_vars(pe)) init.push_back({node, y});
      prov_worklist(g, std::move(init), data);
    }
    std::set<int> control;
    {
      std::deque<std::pair<int, int>> init;
      for (int bp : df.bp[static_cast<size_t>(node)])
        for (int y : free_vars(g.node(bp).expr)) init.push_back({bp, y});
      prov_worklist(g, std::move(init), control);
    }
    f.data_deps.assign(data.begin(), data.end());
    f.control_deps.assign(control.begin(), control.end());
    std::set<int> all(data);
    all.insert(control.begin(), control.end());
    all.insert(node);
    f.deps.assign(all.begin(), all.end());
    an.factors.push_back(std::move(f));
  }
  // J_k: indices of factors whose dependency set (without the self term)
  // contains this sample node.
  for (size_t k = 0; k < an.factors.size(); ++k) {
    int node = an.factors[k].node;
    for (size_t j = 0; j < an.factors.size(); ++j) {
      const FactorSet& fj = an.factors[j];
      bool dep = std::binary_search(fj.data_deps.begin(), fj.data_deps.end(), node) ||
                 std::binary_search(fj.control_deps.begin(), fj.control_deps.end(), node);
      if (dep) an.factors[k].dependents.push_back(static_cast<int>(j));
    }
  }
  return an;
}

namespace {

// Accumulates density only at occurrences of one target node; every other
// sample keeps the standard definedness checks and value injection.
class FilterDensityHandler : public SampleHandler {
public:
  FilterDensityHandler(const Trace& tr, int target) : tr_(tr), target_(target) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    const Value& v = tr_.lookup(addr);
    if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
    if (site.node_id == target_) {
      st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
      ++stats.pdf_evals;
    }
    return HandleResult::bind(v);
  }

private:
  const Trace& tr_;
  int target_;
};

}  // namespace

FactorValue evaluate_factor(const Cfg& g, const Analysis& an, int k, const Trace& tr,
                            uint64_t step_budget) {
  CfgExecOptions opts;
  opts.step_budget = step_budget;
  ProgramState st = ProgramState::initial(g.syms.size());
  FilterDensityHandler h(tr, an.samples[static_cast<size_t>(k)]);
  CfgExecResult r = cfg_exec(g, std::move(st), h, opts);
  FactorValue out;
  out.defined = r.ok;
  out.reason = r.reason;
  out.log_value = r.ok ? r.state.log_density() : 0.0;
  return out;
}

const char* bayes_error_name(BayesError e) {
  switch (e) {
    case BayesError::None: return "none";
    case BayesError::NonConstantAddress: return "non-constant-address";
    case BayesError::DuplicateAddress: return "duplicate-address";
    case BayesError::CyclicDependency: return "cyclic-dependency";
  }
  return "?";
}

BayesError to_bayes_net(const Cfg& g, const Analysis& an, GraphExport& out) {
  out = GraphExport{};
  out.kind = GraphExport::Kind::Bayes;
  std::vector<std::string> addr_of_k(an.samples.size());
  for (size_t k = 0; k < an.samples.size(); ++k) {
    const Expr& ae = g.node(an.samples[k]).sample.addr;
    if (ae.kind != Expr::Kind::Const || !ae.cval.is_str())
      return BayesError::NonConstantAddress;
    addr_of_k[k] = ae.cval.as_str();
    for (size_t j = 0; j < k; ++j)
      if (addr_of_k[j] == addr_of_k[k]) return BayesError::DuplicateAddress;
  }
  out.node_labels = addr_of_k;
  out.parents.assign(addr_of_k.size(), {});
  auto index_of_node = [&](int node_id) { return an.index_of_node(node_id); };
  for (size_t k = 0; k < an.factors.size(); ++k) {
    for (int dep : an.factors[k].deps) {
      int j = index_of_node(dep);
      if (j >= 0 && j != static_cast<int>(k)) {
        out.parents[k].push_back(j);
        out.edges.push_back({j, static_cast<int>(k)});
      }
    }
  }
  // The constant-unique fragment plus loops can still produce cycles; the
  // Bayesian-network reading requires acyclicity, so check it.
  std::vector<int> indeg(out.node_labels.size(), 0);
  for (auto& e : out.edges) ++indeg[static_cast<size_t>(e.second)];
  std::deque<int> q;
  for (size_t i = 0; i < indeg.size(); ++i)
    if (indeg[i] == 0) q.push_back(static_cast<int>(i));
  size_t seen = 0;
  while (!q.empty()) {
    int c = q.front();
    q.pop_front();
    ++seen;
    for (auto& e : out.edges)
      if (e.first == c && --indeg[static_cast<size_t>(e.second)] == 0)
        q.push_back(e.second);
  }
  if (seen != out.node_labels.size()) return BayesError::CyclicDependency;
  return BayesError::None;
}

GraphExport to_markov_net(const Cfg& g, const Analysis& an) {
  GraphExport out;
  out.kind = GraphExport::Kind::Markov;
  // One variable per constant address (merged), one symbolic variable per
  // dynamic address expression.
  std::vector<int> var_of_k(an.samples.size(), -1);
  for (size_t k = 0; k < an.samples.size(); ++k) {
    const Expr& ae = g.node(an.samples[k]).sample.addr;
    std::string label;
    if (ae.kind == Expr::Kind::Const && ae.cval.is_str()) {
      label = ae.cval.as_str();
    } else {
      label = address_pattern(ae);
      if (out.label_index(label) >= 0) label += "#" + std::to_string(an.samples[k]);
    }
    int idx = out.label_index(label);
    if (idx < 0) {
      idx = static_cast<int>(out.node_labels.size());
      out.node_labels.push_back(label);
    }
    var_of_k[k] = idx;
  }
  std::set<std::pair<int, int>> edge_set;
  for (size_t k = 0; k < an.factors.size(); ++k) {
    std::set<int> clique;
    clique.insert(var_of_k[k]);
    for (int dep : an.factors[k].deps) {
      int j = an.index_of_node(dep);
      if (j >= 0) clique.insert(var_of_k[static_cast<size_t>(j)]);
    }
    out.cliques.push_back(std::vector<int>(clique.begin(), clique.end()));
    for (int a : clique)
      for (int b : clique)
        if (a < b) edge_set.insert({a, b});
  }
  out.edges.assign(edge_set.begin(), edge_set.end());
  return out;
}

std::string graph_to_dot(const GraphExport& g) {
  std::string out;
  bool directed = g.kind == GraphExport::Kind::Bayes;
  out += directed ? "digraph model {\n" : "graph model {\n";
  for (size_t i = 0; i < g.node_labels.size(); ++i)
    out += "  v" + std::to_string(i) + " [label=\"" + g.node_labels[i] + "\"];\n";
  for (auto& e : g.edges)
    out += "  v" + std::to_string(e.first) + (directed ? " -> v" : " -- v") +
           std::to_string(e.second) + ";\n";
  out += "}\n";
  return out;
}

std::string factor_report_json(const Cfg& g, const Analysis& an) {
  nlohmann::json j;
  j["factors"] = nlohmann::json::array();
  for (const FactorSet& f : an.factors) {
    nlohmann::json fj;
    fj["k"] = f.k;
    fj["node"] = f.node;
    fj["line"] = f.line;
    fj["address_pattern"] = f.addr_pattern;
    fj["statement"] = g.statement_text(f.node);
    fj["data_deps"] = f.data_deps;
    fj["control_deps"] = f.control_deps;
    fj["deps"] = f.deps;
    fj["dependents"] = f.dependents;
    nlohmann::json addrs = nlohmann::json::array();
    for (int d : f.deps) {
      int kk = an.index_of_node(d);
      addrs.push_back(kk >= 0 ? an.factors[static_cast<size_t>(kk)].addr_pattern : "?");
    }
    fj["address_set"] = addrs;
    j["factors"].push_back(std::move(fj));
  }
  return j.dump(2) + "\n";
}

}  // namespace ppl
