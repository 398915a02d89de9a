#include "doctest.h"

#include <algorithm>

#include "helpers.hpp"

using namespace ppl;
using namespace ppl::test;

TEST_CASE("cfg of skip: start and end only") {
  Cfg g = build_cfg(parse("skip"));
  CHECK(g.nodes.size() == 2);
  CHECK(g.edge_count() == 1);
  CHECK(g.node(g.start).succ[0] == g.end);
}

TEST_CASE("cfg of (x = 10; while (x < 10) do (x = x - 1)) matches the drawn shape") {
  Cfg g = build_cfg(parse("x = 10\nwhile x < 10 do { x = x - 1 }"));
  // start -> assign -> branch; branch ->(true) body -> branch; branch ->(false) join -> end
  REQUIRE(g.nodes.size() == 6);
  const CfgNode& assign = g.node(1);
  CHECK(assign.kind == CfgNode::Kind::Assign);
  const CfgNode& branch = g.node(2);
  REQUIRE(branch.kind == CfgNode::Kind::Branch);
  const CfgNode& body = g.node(3);
  CHECK(body.kind == CfgNode::Kind::Assign);
  const CfgNode& join = g.node(4);
  CHECK(join.kind == CfgNode::Kind::Join);
  CHECK(g.node(0).succ[0] == 1);
  CHECK(assign.succ[0] == 2);
  CHECK(branch.succ[0] == 3);
  CHECK(branch.succ[1] == 4);
  CHECK(body.succ[0] == 2);  // loop back edge
  CHECK(join.succ[0] == g.end);
  REQUIRE(g.pairs.size() == 1);
  CHECK(g.pairs[0].branch == 2);
  CHECK(g.pairs[0].join == 4);
  CHECK(g.pairs[0].is_loop);
}

TEST_CASE("skip-bodied constructs: branch connected to join, self-loop for while") {
  Cfg gif = build_cfg(parse("if x == 1 then { } else { }"));
  const CfgNode* b = nullptr;
  for (const CfgNode& n : gif.nodes)
    if (n.is_branch()) b = &n;
  REQUIRE(b != nullptr);
  CHECK(b->succ[0] == b->succ[1]);  // both arms go straight to the join
  CHECK(gif.node(b->succ[0]).kind == CfgNode::Kind::Join);

  Cfg gw = build_cfg(parse("while x == 1 do { }"));
  const CfgNode* wb = nullptr;
  for (const CfgNode& n : gw.nodes)
    if (n.is_branch()) wb = &n;
  REQUIRE(wb != nullptr);
  CHECK(wb->succ[0] == wb->id);  // (B,B) self edge
}

TEST_CASE("fig4 cfg: 7 statement-bearing nodes, one branch-join pair") {
  Model m = corpus_model("fig4");
  const Cfg& g = m.cfg;
  int bearing = 0;
  for (const CfgNode& n : g.nodes)
    if (n.kind != CfgNode::Kind::Start && n.kind != CfgNode::Kind::End) ++bearing;
  CHECK(bearing == 7);
  REQUIRE(g.pairs.size() == 1);
  CHECK_FALSE(g.pairs[0].is_loop);
  CHECK(g.sample_nodes() == std::vector<int>{1, 2, 4, 7});
}

TEST_CASE("cfg_exec equals the big-step interpreter on the semantics examples") {
  Model br = corpus_model("branching");
  Trace t1;
  t1.set("p", Value::real(0.5));
  t1.set("x", Value::integer(1));
  t1.set("y", Value::integer(1));
  CfgExecResult r = cfg_exec(br.cfg, t1, ProgramState::initial(br.prog));
  REQUIRE(r.ok);
  CHECK(close(std::exp(r.state.log_density()), 0.125, 1e-12));

  Trace t2;
  t2.set("p", Value::real(0.5));
  t2.set("x", Value::integer(1));
  CfgExecResult r2 = cfg_exec(br.cfg, t2, ProgramState::initial(br.prog));
  CHECK_FALSE(r2.ok);
  CHECK(r2.reason == UndefReason::NullTraceValue);

  Cfg empty = build_cfg(parse("skip"));
  CfgExecResult r3 = cfg_exec(empty, Trace{}, ProgramState::initial(2));
  REQUIRE(r3.ok);
  CHECK(r3.state.log_density() == 0.0);
}

TEST_CASE("geometric with b_1 = 0 visits the loop branch twice (enter, exit)") {
  Model geo = corpus_model("geometric");
  Trace tr;
  tr.set("b_1", Value::integer(0));
  CfgExecOptions opts;
  opts.record_sequence = true;
  CfgExecResult r = cfg_exec(geo.cfg, tr, ProgramState::initial(geo.prog), opts);
  REQUIRE(r.ok);
  int branch_id = -1;
  for (const CfgNode& n : geo.cfg.nodes)
    if (n.is_branch()) branch_id = n.id;
  int count = 0;
  for (int id : r.sequence)
    if (id == branch_id) ++count;
  CHECK(count == 2);
}

TEST_CASE("semantic equivalence: interpreter vs CFG executor on corpus traces") {
  for (auto& [name, size] : property_corpus()) {
    Model m = corpus_model(name, 1, size);
    int checked = 0;
    for (uint64_t s = 0; s < 40; ++s) {
      Rng r(Rng::mix(s, Rng::hash_str(name)));
      ForwardResult f = sample_forward(m.prog, r, &m.observed);
      if (!f.ok) continue;
      Trace tr = f.trace;
      // Every third trial perturbs the trace by nulling one key.
      if (s % 3 == 2) {
        auto keys = tr.keys_sorted();
        if (!keys.empty()) tr.erase(keys[s % keys.size()]);
      }
      DensityResult a = density(m.prog, tr);
      CfgExecResult b = cfg_exec(m.cfg, tr, ProgramState::initial(m.prog));
      CHECK(a.defined == b.ok);
      if (a.defined) CHECK(a.log_density == b.state.log_density());
      else CHECK(a.reason == b.reason);
      ++checked;
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("fig4 reaching definitions and branch parents (paper arrows)") {
  Model m = corpus_model("fig4");
  const Cfg& g = m.cfg;
  // ids: 0 start, 1 b, 2 s, 3 branch, 4 mu, 5 m=1, 6 join, 7 x, 8 end
  int m_slot = g.syms.lookup("m");
  REQUIRE(m_slot >= 0);
  CHECK(reaching_definitions(g, 7, m_slot) == std::vector<int>{4, 5});
  int x_slot = g.syms.lookup("x");
  CHECK(reaching_definitions(g, 1, x_slot).empty());
  CHECK(branch_parents(g, 4) == std::vector<int>{3});
  CHECK(branch_parents(g, 1).empty());
  CHECK(branch_parents(g, 7).empty());
}

TEST_CASE("geometric RD at the loop branch includes init and in-loop sample") {
  Model geo = corpus_model("geometric");
  const Cfg& g = geo.cfg;
  int b_slot = g.syms.lookup("b");
  int branch_id = -1, sample_id = -1, init_id = -1;
  for (const CfgNode& n : g.nodes) {
    if (n.is_branch()) branch_id = n.id;
    if (n.is_sample()) sample_id = n.id;
    if (n.kind == CfgNode::Kind::Assign && n.var_slot == b_slot) init_id = n.id;
  }
  std::vector<int> rd = reaching_definitions(g, branch_id, b_slot);
  CHECK(std::count(rd.begin(), rd.end(), sample_id) == 1);
  CHECK(std::count(rd.begin(), rd.end(), init_id) == 1);
  CHECK(branch_parents(g, sample_id) == std::vector<int>{branch_id});
}

TEST_CASE("RD soundness against recorded executions") {
  for (const char* name : {"fig4", "geometric", "hurricane", "hmm", "urn"}) {
    Model m = corpus_model(name, 1, 8);
    Trace tr = forward_trace(m, 5);
    CfgExecOptions opts;
    opts.record_sequence = true;
    CfgExecResult r = cfg_exec(m.cfg, tr, ProgramState::initial(m.prog), opts);
    REQUIRE(r.ok);
    // For every occurrence of node N, the node that last assigned x before N
    // must be one of its reaching definitions.
    std::vector<int> last_def(static_cast<size_t>(m.cfg.syms.size()), -1);
    for (int id : r.sequence) {
      const CfgNode& n = m.cfg.node(id);
      for (int v = 0; v < m.cfg.syms.size(); ++v) {
        if (last_def[static_cast<size_t>(v)] >= 0) {
          std::vector<int> rd = reaching_definitions(m.cfg, id, v);
          CHECK(std::binary_search(rd.begin(), rd.end(), last_def[static_cast<size_t>(v)]));
        }
      }
      if (n.is_def()) last_def[static_cast<size_t>(n.var_slot)] = id;
    }
  }
}

TEST_CASE("BP soundness: gated nodes appear between branch and paired join") {
  for (const char* name : {"fig4", "hurricane", "branching"}) {
    Model m = corpus_model(name, 1, 0);
    Trace tr = forward_trace(m, 2);
    CfgExecOptions opts;
    opts.record_sequence = true;
    CfgExecResult r = cfg_exec(m.cfg, tr, ProgramState::initial(m.prog), opts);
    REQUIRE(r.ok);
    for (size_t i = 0; i < r.sequence.size(); ++i) {
      for (int b : branch_parents(m.cfg, r.sequence[i])) {
        int pi = m.cfg.pair_of_branch(b);
        REQUIRE(pi >= 0);
        int join = m.cfg.pairs[static_cast<size_t>(pi)].join;
        bool ok = false;
        for (size_t j = i; j-- > 0;) {
          if (r.sequence[j] == b) { ok = true; break; }
          if (r.sequence[j] == join) break;
        }
        CHECK(ok);
      }
    }
  }
}

TEST_CASE("DOT emission mentions every node") {
  Model m = corpus_model("fig4");
  std::string dot = cfg_to_dot(m.cfg);
  for (const CfgNode& n : m.cfg.nodes)
    CHECK(dot.find("n" + std::to_string(n.id) + " ") != std::string::npos);
  CHECK(dot.find("label=\"true\"") != std::string::npos);
  CHECK(dot.find("label=\"false\"") != std::string::npos);
}
