#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "ppl/slicer.hpp"

using namespace ppl;
using namespace ppl::test;

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

TEST_CASE("fig5 program 1 slice at B: visit B, read C, score D; A and E absent") {
  Model m = corpus_model("fig5_program1");
  int k = m.an.index_of_node(2);  // B node
  REQUIRE(k >= 0);
  const SlicedProgram& sp = m.factor_slices[static_cast<size_t>(k)];
  CHECK(sp.nodes_with_role(m.cfg, SampleRole::Visit) == std::vector<int>{2});
  CHECK(sp.nodes_with_role(m.cfg, SampleRole::Read) == std::vector<int>{3});
  CHECK(sp.nodes_with_role(m.cfg, SampleRole::Score) == std::vector<int>{4});
  CHECK_FALSE(sp.retained(1));  // A
  CHECK_FALSE(sp.retained(5));  // E
}

TEST_CASE("fig5 program 3 slice at z: the while loop disappears") {
  Model m = corpus_model("fig5_program3");
  // nodes: 0 start, 1 n_data, 2 i=0, 3 branch, 4 z, 5 m, 6 x, 7 i+1, 8 join, 9 end
  int k = m.an.index_of_node(4);
  REQUIRE(k >= 0);
  const SlicedProgram& sp = m.factor_slices[static_cast<size_t>(k)];
  CHECK(sp.nodes_with_role(m.cfg, SampleRole::Visit) == std::vector<int>{4});
  CHECK(sp.nodes_with_role(m.cfg, SampleRole::Score) == std::vector<int>{6});
  CHECK(sp.retained(5));       // m = z == 1 ? ... assignment
  CHECK_FALSE(sp.retained(3)); // loop branch gone
  CHECK_FALSE(sp.retained(7)); // i = i + 1 gone
  CHECK_FALSE(sp.plain_reach);
}

TEST_CASE("fig5 program 2 slice at b: loop of score re-occurrences") {
  Model m = corpus_model("fig5_program2");
  // nodes: 0 start, 1 i=0, 2 b=1, 3 branch b, 4 sample, 5 i=i+1, 6 join, 7 end
  int k = m.an.index_of_node(4);
  REQUIRE(k >= 0);
  const SlicedProgram& sp = m.factor_slices[static_cast<size_t>(k)];
  CHECK(sp.nodes_with_role(m.cfg, SampleRole::Visit) == std::vector<int>{4});
  CHECK(sp.retained(3));  // the while branch stays: self-dependence across iterations
  CHECK(sp.retained(5));
  CHECK_FALSE(sp.retained(1));
  CHECK_FALSE(sp.retained(2));
}

TEST_CASE("psi-totality: every retained sample node has exactly one role") {
  for (auto& [name, size] : property_corpus()) {
    Model m = corpus_model(name, 1, size);
    for (size_t k = 0; k < m.factor_slices.size(); ++k) {
      const SlicedProgram& sp = m.factor_slices[k];
      int visits = 0;
      for (const CfgNode& n : m.cfg.nodes) {
        if (!n.is_sample() || !sp.retained(n.id)) continue;
        SampleRole r = sp.role_of(n.id);
        CHECK(r != SampleRole::Plain);
        if (r == SampleRole::Visit) {
          ++visits;
          CHECK(n.id == sp.origin);
        }
        if (r == SampleRole::Score) {
          bool in_jk = false;
          for (int j : m.an.factors[k].dependents)
            if (m.an.samples[static_cast<size_t>(j)] == n.id) in_jk = true;
          CHECK(in_jk);
        }
        if (r == SampleRole::Read) {
          bool in_jk = n.id == sp.origin;
          for (int j : m.an.factors[k].dependents)
            if (m.an.samples[static_cast<size_t>(j)] == n.id) in_jk = true;
          CHECK_FALSE(in_jk);
        }
      }
      CHECK(visits == 1);
    }
  }
}

TEST_CASE("empty-dependent factor yields a visit-only slice") {
  Model m = model_from_source("single_x", "x = sample(\"x\", Normal(0.0, 1.0))");
  const SlicedProgram& sp = m.factor_slices[0];
  int retained = 0;
  for (const CfgNode& n : m.cfg.nodes)
    if (sp.retained(n.id) && n.kind != CfgNode::Kind::Start && n.kind != CfgNode::Kind::End)
      ++retained;
  CHECK(retained == 1);
  Trace tr;
  tr.set("x", Value::real(0.7));
  SliceDensityHandler h(tr);
  ProgramState st = ProgramState::initial(m.prog);
  CfgExecResult r = run_slice(m.cfg, sp, std::move(st), h);
  REQUIRE(r.ok);
  CHECK(close(r.state.log_density(), -0.5 * 0.49 - 0.5 * kLog2Pi, 1e-14));
}

TEST_CASE("run_slice on fig5 program 1 at B: exactly visit + score terms") {
  Model m = corpus_model("fig5_program1");
  Trace tr;
  for (const char* a : {"A", "B", "C", "D", "E"}) tr.set(a, Value::real(0.0));
  // Checkpoint at B: state after the A sample.
  CheckpointRecorder rec(tr);
  CfgExecResult full = cfg_exec(m.cfg, ProgramState::initial(m.prog), rec);
  REQUIRE(full.ok);
  Checkpoint ck = rec.ckpts.at("B");
  int k = m.an.index_of_node(ck.node);
  ProgramState st = ck.state;
  st.log_p.reset();
  SliceDensityHandler h(tr);
  CfgExecResult r = run_slice(m.cfg, m.factor_slices[static_cast<size_t>(k)], std::move(st), h);
  REQUIRE(r.ok);
  // log pdf_N(0;0,1) + log pdf_N(0;0+0,1); the read of C contributes nothing.
  double expected = 2.0 * (-0.5 * kLog2Pi);
  CHECK(close(r.state.log_density(), expected, 1e-14));
  CHECK(h.terms == std::vector<std::string>{"B", "D"});
}

TEST_CASE("smc slices (Appendix D.6 goldens)") {
  Model p3 = corpus_model("fig5_program3");
  // at z: z then x, x routes to end; loop machinery excluded
  const SlicedProgram& sz = p3.smc_slices[static_cast<size_t>(p3.an.index_of_node(4))];
  CHECK(sz.retained(4));
  CHECK(sz.retained(5));
  CHECK(sz.retained(6));
  CHECK_FALSE(sz.retained(7));  // i = i + 1 is beyond the next sample

  Model p1 = corpus_model("fig5_program1");
  const SlicedProgram& sa = p1.smc_slices[static_cast<size_t>(p1.an.index_of_node(1))];
  CHECK(sa.retained(1));
  CHECK(sa.retained(2));  // B reachable sample-free
  CHECK_FALSE(sa.retained(3));  // C only reachable through B
  const SlicedProgram& se = p1.smc_slices[static_cast<size_t>(p1.an.index_of_node(5))];
  CHECK(se.retained(5));
  // no subsequent samples: execution runs to End
  Trace tr;
  for (const char* a : {"A", "B", "C", "D", "E"}) tr.set(a, Value::real(0.0));
  CheckpointRecorder rec(tr);
  CfgExecResult full = cfg_exec(p1.cfg, ProgramState::initial(p1.prog), rec);
  REQUIRE(full.ok);
  ProgramState st = rec.ckpts.at("E").state;
  DensityHandler h(tr);
  CfgExecResult r = run_slice(p1.cfg, se, std::move(st), h);
  CHECK(r.ok);
  CHECK_FALSE(r.paused);
}

TEST_CASE("Theorem 5.1 log-ratio identity on the corpus") {
  for (auto& [name, size] : property_corpus()) {
    Model m = corpus_model(name, 1, std::min(size, 12));
    int done = 0;
    for (uint64_t s = 0; s < 80 && done < 25; ++s) {
      Trace tr1 = forward_trace(m, 900 + s);
      auto keys = latent_keys(m, tr1);
      if (keys.empty()) continue;
      const std::string alpha = keys[(s * 7) % keys.size()];
      Trace tr1m, tr2;
      if (!perturb_merged(m, tr1, alpha, s, tr1m, tr2)) continue;
      tr1 = tr1m;
      // single-occurrence precondition, checked dynamically
      if (node_of_address(m, tr1, alpha) < 0 || node_of_address(m, tr2, alpha) < 0) continue;

      CheckpointRecorder rec(tr1);
      CfgExecResult full1 = cfg_exec(m.cfg, ProgramState::initial(m.prog), rec);
      REQUIRE(full1.ok);
      if (rec.duplicate.count(alpha)) continue;
      Checkpoint ck = rec.ckpts.at(alpha);
      int k = m.an.index_of_node(ck.node);
      REQUIRE(k >= 0);

      DensityResult d1 = density(m.prog, tr1);
      DensityResult d2 = density(m.prog, tr2);
      REQUIRE(d1.defined);
      if (!d2.defined) continue;

      auto slice_log = [&](const Trace& tr) {
        ProgramState st = ck.state;
        st.log_p.reset();
        SliceDensityHandler h(tr);
        CfgExecResult r = run_slice(m.cfg, m.factor_slices[static_cast<size_t>(k)],
                                    std::move(st), h);
        REQUIRE(r.ok);
        return r.state.log_density();
      };
      double lhs = d1.log_density - d2.log_density;
      double rhs = slice_log(tr1) - slice_log(tr2);
      CHECK_MESSAGE(close(lhs, rhs, 1e-9), name, " alpha=", alpha, " lhs=", lhs,
                    " rhs=", rhs);
      ++done;
    }
    CHECK_MESSAGE(done > 0, name, ": no valid perturbation trials");
  }
}

TEST_CASE("SMC continuation (Prop 5.5): segment replay matches the full run") {
  for (const char* name : {"fig5_program3", "gmm_fixed", "hmm", "geometric"}) {
    Model m = corpus_model(name, 1, 8);
    Trace tr = forward_trace(m, 31);
    CfgExecOptions opts;
    opts.record_sequence = true;
    opts.record_states = true;
    CfgExecResult full = cfg_exec(m.cfg, tr, ProgramState::initial(m.prog), opts);
    REQUIRE(full.ok);
    // Sample occurrences of the full run, in order.
    std::vector<size_t> sample_pos;
    for (size_t i = 0; i < full.sequence.size(); ++i)
      if (m.cfg.node(full.sequence[i]).is_sample()) sample_pos.push_back(i);

    // Replay: entry slice, then one SMC slice per pending sample.
    DensityHandler h0(tr);
    CfgExecResult cur = run_slice(m.cfg, m.smc_entry, ProgramState::initial(m.prog), h0);
    size_t seg = 0;
    while (cur.paused) {
      REQUIRE(seg < sample_pos.size());
      size_t pos = sample_pos[seg];
      CHECK(cur.paused_node == full.sequence[pos]);
      // The checkpoint state matches the full run's state at that occurrence.
      const ProgramState& ref = full.states[pos];
      CHECK(cur.state.log_density() == ref.log_density());
      for (size_t v = 0; v < ref.vars.size(); ++v)
        CHECK(cur.state.vars[v].equals(ref.vars[v]));
      int k = m.an.index_of_node(cur.paused_node);
      REQUIRE(k >= 0);
      DensityHandler h(tr);
      cur = run_slice(m.cfg, m.smc_slices[static_cast<size_t>(k)], std::move(cur.state), h);
      REQUIRE_FALSE(cur.undefined());
      ++seg;
    }
    CHECK(seg == sample_pos.size());
    CHECK(cur.state.log_density() == full.state.log_density());
  }
}
