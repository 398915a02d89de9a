#include "ppl/cfg.hpp"

#include <algorithm>
#include <deque>

#include "ppl/parser.hpp"

namespace ppl {

namespace {

struct Builder {
  Cfg g;

  int add_node(CfgNode::Kind k) {
    CfgNode n;
    n.id = static_cast<int>(g.nodes.size());
    n.kind = k;
    g.nodes.push_back(std::move(n));
    return g.nodes.back().id;
  }

  // A dangling edge source: node id + successor slot (0 or 1).
  struct Attach {
    int node;
    int slot;
  };

  void connect(Attach a, int target) { g.nodes[static_cast<size_t>(a.node)].succ[a.slot] = target; }

  Attach translate(const Stmt& s, Attach src) {
    switch (s.kind) {
      case Stmt::Kind::Skip:
        return src;
      case Stmt::Kind::Assign: {
        int n = add_node(CfgNode::Kind::Assign);
        g.nodes[n].var_slot = s.var_slot;
        g.nodes[n].var_name = s.var_name;
        g.nodes[n].expr = s.expr;
        g.nodes[n].line = s.line;
        connect(src, n);
        return {n, 0};
      }
      case Stmt::Kind::Sample: {
        int n = add_node(CfgNode::Kind::Sample);
        g.nodes[n].var_slot = s.var_slot;
        g.nodes[n].var_name = s.var_name;
        g.nodes[n].sample = s.sample;
        g.nodes[n].line = s.line;
        connect(src, n);
        return {n, 0};
      }
      case Stmt::Kind::Seq:
        return translate(*s.kids[1], translate(*s.kids[0], src));
      case Stmt::Kind::If: {
        int b = add_node(CfgNode::Kind::Branch);
        g.nodes[b].expr = s.expr;
        g.nodes[b].line = s.line;
        connect(src, b);
        Attach t_exit = translate(*s.kids[0], {b, 0});
        Attach e_exit = translate(*s.kids[1], {b, 1});
        int j = add_node(CfgNode::Kind::Join);
        connect(t_exit, j);
        connect(e_exit, j);
        g.pairs.push_back({b, j, false});
        return {j, 0};
      }
      case Stmt::Kind::While: {
        int b = add_node(CfgNode::Kind::Branch);
        g.nodes[b].expr = s.expr;
        g.nodes[b].line = s.line;
        connect(src, b);
        Attach body_exit = translate(*s.kids[0], {b, 0});
        connect(body_exit, b);  // back edge (B,B) when the body is skip
        int j = add_node(CfgNode::Kind::Join);
        connect({b, 1}, j);
        g.pairs.push_back({b, j, true});
        return {j, 0};
      }
    }
    return src;
  }
};

}  // namespace

Cfg build_cfg(const Program& p) {
  Builder b;
  b.g.syms = p.syms;
  int start = b.add_node(CfgNode::Kind::Start);
  Builder::Attach exit = b.translate(*p.body, {start, 0});
  int end = b.add_node(CfgNode::Kind::End);
  b.connect(exit, end);
  b.g.start = start;
  b.g.end = end;
  for (const CfgNode& n : b.g.nodes)
    for (int slot = 0; slot < 2; ++slot)
      if (n.succ[slot] >= 0) b.g.nodes[static_cast<size_t>(n.succ[slot])].preds.push_back(n.id);
  return std::move(b.g);
}

int Cfg::pair_of_branch(int branch_id) const {
  for (size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].branch == branch_id) return static_cast<int>(i);
  return -1;
}

std::vector<int> Cfg::sample_nodes() const {
  std::vector<int> out;
  for (const CfgNode& n : nodes)
    if (n.is_sample()) out.push_back(n.id);
  return out;
}

size_t Cfg::edge_count() const {
  size_t c = 0;
  for (const CfgNode& n : nodes)
    for (int slot = 0; slot < 2; ++slot)
      if (n.succ[slot] >= 0) ++c;
  return c;
}

std::string Cfg::statement_text(int id) const {
  const CfgNode& n = node(id);
  switch (n.kind) {
    case CfgNode::Kind::Start: return "start";
    case CfgNode::Kind::End: return "end";
    case CfgNode::Kind::Join: return "join";
    case CfgNode::Kind::Branch: return "branch " + pretty_print_expr(n.expr);
    case CfgNode::Kind::Assign: return n.var_name + " = " + pretty_print_expr(n.expr);
    case CfgNode::Kind::Sample: {
      std::string s = n.var_name + " = sample(" + pretty_print_expr(n.sample.addr) + ", " +
                      n.sample.dist_name + "(";
      for (size_t i = 0; i < n.sample.params.size(); ++i) {
        if (i) s += ", ";
        s += pretty_print_expr(n.sample.params[i]);
      }
      return s + "))";
    }
  }
  return "?";
}

namespace {

Dataflow compute_dataflow(const Cfg& g) {
  Dataflow df;
  size_t n = g.nodes.size();
  int nvars = g.syms.size();
  df.rd.assign(n, std::vector<std::set<int>>(static_cast<size_t>(nvars)));
  df.bp.assign(n, {});

  // Reaching definitions: forward may-fixpoint per variable.
  for (int v = 0; v < nvars; ++v) {
    std::vector<std::set<int>> in(n), out(n);
    bool changed = true;
    while (changed) {
      changed = false;
      for (const CfgNode& nd : g.nodes) {
        std::set<int> ni;
        for (int p : nd.preds) ni.insert(out[static_cast<size_t>(p)].begin(),
                                         out[static_cast<size_t>(p)].end());
        std::set<int> no = (nd.is_def() && nd.var_slot == v) ? std::set<int>{nd.id} : ni;
        if (ni != in[static_cast<size_t>(nd.id)] || no != out[static_cast<size_t>(nd.id)]) {
          in[static_cast<size_t>(nd.id)] = std::move(ni);
          out[static_cast<size_t>(nd.id)] = std::move(no);
          changed = true;
        }
      }
    }
    for (size_t i = 0; i < n; ++i) df.rd[i][static_cast<size_t>(v)] = std::move(in[i]);
  }

  // Live variables: backward may-fixpoint.
  {
    std::vector<std::set<int>> use(n);
    std::vector<int> def(n, -1);
    for (const CfgNode& nd : g.nodes) {
      std::set<int>& u = use[static_cast<size_t>(nd.id)];
      switch (nd.kind) {
        case CfgNode::Kind::Assign:
          free_vars(nd.expr, u);
          def[static_cast<size_t>(nd.id)] = nd.var_slot;
          break;
        case CfgNode::Kind::Sample:
          free_vars(nd.sample.addr, u);
          for (const Expr& pe : nd.sample.params) free_vars(pe, u);
          def[static_cast<size_t>(nd.id)] = nd.var_slot;
          break;
        case CfgNode::Kind::Branch:
          free_vars(nd.expr, u);
          break;
        default:
          break;
      }
    }
    std::vector<std::set<int>> in(n);
    bool changed = true;
    while (changed) {
      changed = false;
      for (size_t i = n; i-- > 0;) {
        const CfgNode& nd = g.nodes[i];
        std::set<int> out;
        for (int slot = 0; slot < 2; ++slot)
          if (nd.succ[slot] >= 0)
            out.insert(in[static_cast<size_t>(nd.succ[slot])].begin(),
                       in[static_cast<size_t>(nd.succ[slot])].end());
        if (def[i] >= 0) out.erase(def[i]);
        out.insert(use[i].begin(), use[i].end());
        if (out != in[i]) {
          in[i] = std::move(out);
          changed = true;
        }
      }
    }
    df.live = std::move(in);
  }

  // Branch parents: N is gated by (B, J) iff it is a strict interior node of
  // some walk from B to J.
  for (const BranchJoinPair& pr : g.pairs) {
    // Forward from B via at least one edge.
    std::vector<char> fwd(n, 0);
    std::deque<int> q;
    for (int slot = 0; slot < 2; ++slot) {
      int s = g.node(pr.branch).succ[slot];
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
          q.push_back(s);
        }
      }
    }
    // Backward from J via at least one edge.
    std::vector<char> bwd(n, 0);
    for (int p : g.node(pr.join).preds)
      if (!bwd[static_cast<size_t>(p)]) {
        bwd[static_cast<size_t>(p)] = 1;
        q.push_back(p);
      }
    while (!q.empty()) {
      int c = q.front();
      q.pop_front();
      for (int p : g.node(c).preds)
        if (!bwd[static_cast<size_t>(p)]) {
          bwd[static_cast<size_t>(p)] = 1;
          q.push_back(p);
        }
    }
    for (size_t i = 0; i < n; ++i)
      if (fwd[i] && bwd[i] && static_cast<int>(i) != pr.join)
        df.bp[i].insert(pr.branch);
  }
  return df;
}

}  // namespace

const Dataflow& Cfg::dataflow() const {
  if (!df_) df_ = std::make_shared<const Dataflow>(compute_dataflow(*this));
  return *df_;
}

std::vector<int> reaching_definitions(const Cfg& g, int node, int var_slot) {
  const auto& s = g.dataflow().rd[static_cast<size_t>(node)][static_cast<size_t>(var_slot)];
  return std::vector<int>(s.begin(), s.end());
}

std::vector<int> branch_parents(const Cfg& g, int node) {
  const auto& s = g.dataflow().bp[static_cast<size_t>(node)];
  return std::vector<int>(s.begin(), s.end());
}

CfgExecResult cfg_exec(const Cfg& g, ProgramState st, SampleHandler& handler,
                       const CfgExecOptions& opts) {
  CfgExecResult res;
  res.state = std::move(st);

  const SliceView* sv = opts.slice;
  int cur = sv ? sv->origin : g.start;
  bool entry_pending = sv != nullptr;  // first arrival at origin
  uint64_t steps = 0;
  LoopCoord loop_stack;

  auto fail = [&](UndefReason r) {
    res.ok = false;
    res.reason = r;
    handler.stats.steps += steps;
    return res;
  };

  auto successor = [&](int id, int slot) -> int {
    int nxt = g.node(id).succ[slot];
    if (nxt < 0) return g.end;
    if (sv && !sv->retained[static_cast<size_t>(nxt)] && nxt != g.end) return g.end;
    return nxt;
  };

  while (true) {
    if (++steps > opts.step_budget) return fail(UndefReason::StepBudget);
    const CfgNode& n = g.node(cur);

    if (opts.record_coords && n.is_branch()) {
      int pi = g.pair_of_branch(cur);
      if (pi >= 0 && g.pairs[static_cast<size_t>(pi)].is_loop) {
        if (!loop_stack.empty() && loop_stack.back().first == pi)
          ++loop_stack.back().second;
        else
          loop_stack.push_back({pi, 0});
      }
    }
    if (opts.record_sequence) {
      res.sequence.push_back(cur);
      if (opts.record_coords) res.coords.push_back(loop_stack);
      if (opts.record_states) res.states.push_back(res.state);
    }

    switch (n.kind) {
      case CfgNode::Kind::Start:
        cur = successor(cur, 0);
        break;
      case CfgNode::Kind::End:
        res.ok = true;
        handler.stats.steps += steps;
        return res;
      case CfgNode::Kind::Join:
        cur = successor(cur, 0);
        break;
      case CfgNode::Kind::Assign:
        res.state.vars[static_cast<size_t>(n.var_slot)] = eval_expr(res.state, n.expr);
        cur = successor(cur, 0);
        break;
      case CfgNode::Kind::Branch: {
        bool ok = false;
        bool c = eval_expr(res.state, n.expr).truthy(&ok);
        if (!ok) return fail(UndefReason::NonBoolCondition);
        if (opts.record_coords && !c) {
          int pi = g.pair_of_branch(cur);
          if (pi >= 0 && g.pairs[static_cast<size_t>(pi)].is_loop && !loop_stack.empty() &&
              loop_stack.back().first == pi)
            loop_stack.pop_back();
        }
        cur = successor(cur, c ? 0 : 1);
        break;
      }
      case CfgNode::Kind::Sample: {
        bool is_entry = entry_pending && sv && cur == sv->origin;
        entry_pending = false;
        if (sv && sv->smc && !is_entry) {
          // Pause before executing the next sample node (Prop. 5.5 exit).
          res.ok = false;
          res.paused = true;
          res.paused_node = cur;
          handler.stats.steps += steps;
          return res;
        }
        Value av = eval_expr(res.state, n.sample.addr);
        if (av.is_null()) return fail(UndefReason::NullParam);
        if (!av.is_str()) return fail(UndefReason::NonStringAddress);
        std::vector<Value> params;
        params.reserve(n.sample.params.size());
        for (const Expr& pe : n.sample.params) {
          params.push_back(eval_expr(res.state, pe));
          if (params.back().is_null()) return fail(UndefReason::NullParam);
        }
        SampleSite site;
        site.node_id = cur;
        site.data = &n.sample;
        site.var_slot = n.var_slot;
        site.line = n.line;
        if (sv) {
          if (cur == sv->origin)
            site.role = is_entry ? SampleRole::Visit : SampleRole::Score;
          else
            site.role = sv->role[static_cast<size_t>(cur)];
        }
        HandleResult r = handler.on_sample(site, av.as_str(), params, res.state);
        if (r.act == HandleResult::Act::Fail) return fail(r.reason);
        res.state.vars[static_cast<size_t>(n.var_slot)] = std::move(r.value);
        cur = successor(cur, 0);
        break;
      }
    }
  }
}

CfgExecResult cfg_exec(const Cfg& g, const Trace& tr, ProgramState st,
                       const CfgExecOptions& opts) {
  DensityHandler h(tr);
  return cfg_exec(g, std::move(st), h, opts);
}

std::string cfg_to_dot(const Cfg& g) {
  std::string out = "digraph cfg {\n  node [shape=box];\n";
  for (const CfgNode& n : g.nodes) {
    std::string shape;
    switch (n.kind) {
      case CfgNode::Kind::Branch: shape = ", shape=diamond"; break;
      case CfgNode::Kind::Join: shape = ", shape=diamond, style=filled, fillcolor=black, fontcolor=white"; break;
      case CfgNode::Kind::Start:
      case CfgNode::Kind::End: shape = ", shape=ellipse"; break;
      default: break;
    }
    std::string label = "n" + std::to_string(n.id) + ": " + g.statement_text(n.id);
    std::string esc;
    for (char c : label) {
      if (c == '"' || c == '\\') esc += '\\';
      esc += c;
    }
    out += "  n" + std::to_string(n.id) + " [label=\"" + esc + "\"" + shape + "];\n";
  }
  for (const CfgNode& n : g.nodes) {
    if (n.is_branch()) {
      if (n.succ[0] >= 0)
        out += "  n" + std::to_string(n.id) + " -> n" + std::to_string(n.succ[0]) +
               " [label=\"true\"];\n";
      if (n.succ[1] >= 0)
        out += "  n" + std::to_string(n.id) + " -> n" + std::to_string(n.succ[1]) +
               " [label=\"false\"];\n";
    } else if (n.succ[0] >= 0) {
      out += "  n" + std::to_string(n.id) + " -> n" + std::to_string(n.succ[0]) + ";\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace ppl
