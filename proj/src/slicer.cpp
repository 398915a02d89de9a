#include "ppl/slicer.hpp"

#include <algorithm>
#include <deque>

namespace ppl {

namespace {

const char* role_name(SampleRole r) {
  switch (r) {
    case SampleRole::Visit: return "visit";
    case SampleRole::Score: return "score";
    case SampleRole::Read: return "read";
    case SampleRole::Plain: return "plain";
  }
  return "?";
}

}  // namespace

std::vector<int> SlicedProgram::nodes_with_role(const Cfg& g, SampleRole r) const {
  std::vector<int> out;
  for (const CfgNode& n : g.nodes)
    if (n.is_sample() && retained(n.id) && role_of(n.id) == r) out.push_back(n.id);
  return out;
}

SlicedProgram slice_for_factor(const Cfg& g, const Analysis& an, int k) {
  size_t n = g.nodes.size();
  int origin = an.samples[static_cast<size_t>(k)];
  const FactorSet& fk = an.factors[static_cast<size_t>(k)];

  // Restricting retained paths to "N_k only at the start" (Appendix D.1) is
  // what collapses whole loops to a single iteration: once execution passes
  // N_k again, the origin's influence is gone because N_k reassigns its
  // variable. That argument fails when some other variable that is live
  // into N_k carries the origin's provenance across the re-execution (the
  // lazily grown cluster vectors of the Dirichlet-process model, say). In
  // that case fall back to plain reachability, which never exits early.
  bool carrier_live = false;
  const Dataflow& df = g.dataflow();
  for (int y : df.live[static_cast<size_t>(origin)]) {
    std::vector<int> pv = prov_node(g, origin, y);
    if (std::binary_search(pv.begin(), pv.end(), origin)) {
      carrier_live = true;
      break;
    }
  }
  bool norevisit = !carrier_live;

  // Forward: reachable from N_k (paths keep N_k at the start only, unless
  // the fallback is active).
  std::vector<char> fwd(n, 0);
  fwd[static_cast<size_t>(origin)] = 1;
  std::deque<int> q;
  for (int slot = 0; slot < 2; ++slot) {
    int s = g.node(origin).succ[slot];
    if (s >= 0 && !fwd[static_cast<size_t>(s)]) {
      fwd[static_cast<size_t>(s)] = 1;
      q.push_back(s);
    }
  }
  while (!q.empty()) {
    int c = q.front();
    q.pop_front();
    for (int slot = 0; slot < 2; ++slot) {
      int s = g.node(c).succ[slot];
      if (s >= 0 && !fwd[static_cast<size_t>(s)]) {
        fwd[static_cast<size_t>(s)] = 1;
        if (!norevisit || s != origin) q.push_back(s);
      }
    }
  }

  // Backward: nodes from which some dependent is reachable. A self-dependent
  // N_k counts as a path endpoint.
  std::vector<char> bwd(n, 0);
  for (int j : fk.dependents) {
    int d = an.samples[static_cast<size_t>(j)];
    if (!bwd[static_cast<size_t>(d)]) {
      bwd[static_cast<size_t>(d)] = 1;
      q.push_back(d);
    }
  }
  while (!q.empty()) {
    int c = q.front();
    q.pop_front();
    for (int p : g.node(c).preds) {
      if (bwd[static_cast<size_t>(p)]) continue;
      bwd[static_cast<size_t>(p)] = 1;
      if (!norevisit || p != origin) q.push_back(p);
    }
  }

  SlicedProgram sp;
  sp.k = k;
  sp.origin = origin;
  sp.smc = false;
  sp.plain_reach = !norevisit;
  sp.view.origin = origin;
  sp.view.smc = false;
  sp.view.retained.assign(n, 0);
  sp.view.role.assign(n, SampleRole::Plain);
  for (size_t i = 0; i < n; ++i)
    if (fwd[i] && bwd[i]) sp.view.retained[i] = 1;
  sp.view.retained[static_cast<size_t>(origin)] = 1;

  std::vector<char> is_dep(n, 0);
  for (int j : fk.dependents) is_dep[static_cast<size_t>(an.samples[static_cast<size_t>(j)])] = 1;
  for (const CfgNode& nd : g.nodes) {
    if (!nd.is_sample() || !sp.view.retained[static_cast<size_t>(nd.id)]) continue;
    if (nd.id == origin)
      sp.view.role[static_cast<size_t>(nd.id)] = SampleRole::Visit;
    else if (is_dep[static_cast<size_t>(nd.id)])
      sp.view.role[static_cast<size_t>(nd.id)] = SampleRole::Score;
    else
      sp.view.role[static_cast<size_t>(nd.id)] = SampleRole::Read;
  }
  return sp;
}

SlicedProgram slice_for_smc(const Cfg& g, int origin_node) {
  size_t n = g.nodes.size();
  int origin = origin_node < 0 ? g.start : origin_node;

  std::vector<char> fwd(n, 0);
  fwd[static_cast<size_t>(origin)] = 1;
  std::deque<int> q;
  for (int slot = 0; slot < 2; ++slot) {
    int s = g.node(origin).succ[slot];
    if (s >= 0 && !fwd[static_cast<size_t>(s)]) {
      fwd[static_cast<size_t>(s)] = 1;
      q.push_back(s);
    }
  }
  while (!q.empty()) {
    int c = q.front();
    q.pop_front();
    if (g.node(c).is_sample()) continue;  // later samples end the slice
    for (int slot = 0; slot < 2; ++slot) {
      int s = g.node(c).succ[slot];
      if (s >= 0 && !fwd[static_cast<size_t>(s)]) {
        fwd[static_cast<size_t>(s)] = 1;
        q.push_back(s);
      }
    }
  }

  // Backward: every sample node is a legal path endpoint, so this is plain
  // co-reachability of the sample-node set (expansion only ever visits
  // non-sample nodes; paths with a sample in the interior are covered by
  // that sample's own seed).
  std::vector<char> bwd(n, 0);
  for (const CfgNode& nd : g.nodes) {
    if (nd.is_sample()) {
      bwd[static_cast<size_t>(nd.id)] = 1;
      q.push_back(nd.id);
    }
  }
  while (!q.empty()) {
    int c = q.front();
    q.pop_front();
    for (int p : g.node(c).preds) {
      if (bwd[static_cast<size_t>(p)]) continue;
      bwd[static_cast<size_t>(p)] = 1;
      q.push_back(p);
    }
  }

  SlicedProgram sp;
  sp.k = -1;
  sp.origin = origin;
  sp.smc = true;
  sp.view.origin = origin;
  sp.view.smc = true;
  sp.view.retained.assign(n, 0);
  sp.view.role.assign(n, SampleRole::Plain);
  for (size_t i = 0; i < n; ++i)
    if (fwd[i] && bwd[i]) sp.view.retained[i] = 1;
  sp.view.retained[static_cast<size_t>(origin)] = 1;
  return sp;
}

CfgExecResult run_slice(const Cfg& g, const SlicedProgram& sp, ProgramState checkpoint,
                        SampleHandler& handler, uint64_t step_budget) {
  CfgExecOptions opts;
  opts.step_budget = step_budget;
  opts.slice = &sp.view;
  return cfg_exec(g, std::move(checkpoint), handler, opts);
}

std::string slice_dump(const Cfg& g, const SlicedProgram& sp) {
  std::string out;
  if (sp.smc) {
    out += "smc slice from " +
           (sp.origin == g.start ? std::string("start") : "n" + std::to_string(sp.origin)) + "\n";
  } else {
    out += "slice for factor of node n" + std::to_string(sp.origin) + " (" +
           address_pattern(g.node(sp.origin).sample.addr) + ")\n";
  }
  for (const CfgNode& n : g.nodes) {
    if (!sp.retained(n.id) || n.kind == CfgNode::Kind::Start || n.kind == CfgNode::Kind::End)
      continue;
    std::string tag;
    if (n.is_sample()) tag = std::string("[") + role_name(sp.role_of(n.id)) + "] ";
    out += "  n" + std::to_string(n.id) + ": " + tag + g.statement_text(n.id) + "\n";
  }
  out += "edges:";
  bool any = false;
  for (const CfgNode& n : g.nodes) {
    if (!sp.retained(n.id) || n.id == g.end) continue;
    for (int slot = 0; slot < 2; ++slot) {
      int s = n.succ[slot];
      if (s < 0) continue;
      bool kept = sp.retained(s) || s == g.end;
      out += std::string(" n") + std::to_string(n.id) + "->" +
             (kept && s != g.end ? "n" + std::to_string(s) : "end");
      any = true;
    }
  }
  if (!any) out += " (none)";
  out += "\n";
  return out;
}

std::string slice_to_dot(const Cfg& g, const SlicedProgram& sp) {
  std::string out = "digraph slice {\n  node [shape=box];\n  start [shape=ellipse];\n  end "
                    "[shape=ellipse];\n";
  for (const CfgNode& n : g.nodes) {
    if (!sp.retained(n.id) || n.kind == CfgNode::Kind::Start || n.kind == CfgNode::Kind::End)
      continue;
    std::string label = "n" + std::to_string(n.id) + ": " + g.statement_text(n.id);
    if (n.is_sample()) label = std::string(role_name(sp.role_of(n.id))) + " " + label;
    std::string esc;
    for (char c : label) {
      if (c == '"' || c == '\\') esc += '\\';
      esc += c;
    }
    out += "  n" + std::to_string(n.id) + " [label=\"" + esc + "\"";
    if (n.is_branch()) out += ", shape=diamond";
    out += "];\n";
  }
  out += "  start -> n" + std::to_string(sp.origin) + ";\n";
  for (const CfgNode& n : g.nodes) {
    if (!sp.retained(n.id) || n.id == g.end) continue;
    if (n.kind == CfgNode::Kind::Start) continue;
    for (int slot = 0; slot < 2; ++slot) {
      int s = n.succ[slot];
      if (s < 0) continue;
      std::string from = "n" + std::to_string(n.id);
      std::string to = (sp.retained(s) && s != g.end) ? "n" + std::to_string(s) : "end";
      std::string lbl = n.is_branch() ? (slot == 0 ? " [label=\"true\"]" : " [label=\"false\"]") : "";
      out += "  " + from + " -> " + to + lbl + ";\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace ppl
