#include "ppl/smc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ppl {

namespace {

// Shared value policy of both variants: observed addresses are clamped,
// known addresses replay the particle trace, fresh addresses draw from the
// prior keyed by (particle, address).
class ParticleHandler : public SampleHandler {
public:
  ParticleHandler(const Model& m, Trace& tr, LogAccum& dq, uint64_t master, int pidx)
      : m_(m), tr_(tr), dq_(dq), master_(master), pidx_(pidx) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    const DistEntry& de = dist_at(site.data->dist);
    Value v = m_.observed.lookup(addr);
    if (v.is_null()) v = tr_.lookup(addr);
    if (v.is_null()) {
      Rng r = Rng::keyed(master_, "smc", static_cast<uint64_t>(pidx_), 0, addr);
      v = de.sample(params, r);
      if (v.is_null()) return HandleResult::fail(UndefReason::NullParam);
      tr_.set(addr, v);
      // Importance correction: fresh latents are proposed from the prior,
      // so their proposal density divides out of the step weight.
      dq_.add(de.log_pdf(v, params));
    }
    st.log_p.add(de.log_pdf(v, params));
    ++stats.pdf_evals;
    last_addr = addr;
    executed = true;
    return HandleResult::bind(std::move(v));
  }

  std::string last_addr;
  bool executed = false;

private:
  const Model& m_;
  Trace& tr_;
  LogAccum& dq_;
  uint64_t master_;
  int pidx_;
};

struct NaiveParticle {
  Trace trace;
  double prev_logp = 0.0;
  double step_weight = 0.0;
  std::string error;
};

struct IterParticle {
  Trace trace;
  ProgramState state;
  int pending = -1;  // sample node the particle is paused at
  int obs_count = 0;
  bool done = false;
  double step_weight = 0.0;
  std::string error;
};

struct Resample {
  double ess = 0.0;
  double log_z_inc = 0.0;
  std::vector<int> ancestors;
  bool degenerate = false;
};

Resample systematic_resample(const std::vector<double>& logw, uint64_t master, int t) {
  Resample rs;
  size_t n = logw.size();
  double mx = -HUGE_VAL;
  for (double w : logw) mx = std::max(mx, w);
  if (!std::isfinite(mx)) {
    rs.degenerate = true;
    return rs;
  }
  std::vector<double> w(n);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    w[i] = std::exp(logw[i] - mx);
    total += w[i];
  }
  if (!(total > 0.0)) {
    rs.degenerate = true;
    return rs;
  }
  double sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    w[i] /= total;
    sq += w[i] * w[i];
  }
  rs.ess = 1.0 / sq;
  rs.log_z_inc = std::log(total / static_cast<double>(n)) + mx;

  double u0 = Rng::keyed(master, "resample", static_cast<uint64_t>(t)).next_double();
  rs.ancestors.resize(n);
  double cum = w[0];
  size_t j = 0;
  for (size_t i = 0; i < n; ++i) {
    double pos = (static_cast<double>(i) + u0) / static_cast<double>(n);
    while (pos > cum && j + 1 < n) cum += w[++j];
    rs.ancestors[i] = static_cast<int>(j);
  }
  return rs;
}

}  // namespace

SmcResult smc_run(const Model& m, bool iterative, int particles, uint64_t seed, int threads) {
  SmcResult res;
  auto t0 = std::chrono::steady_clock::now();
  int T = m.data_size;
  if (m.mf.size_var.empty() || T <= 0) {
    res.error = "model has no data schedule (size variable) for SMC";
    return res;
  }

  // Truncated programs for the naive variant (p_1..p_T).
  std::vector<Program> truncated;
  if (!iterative) {
    truncated.reserve(static_cast<size_t>(T));
    for (int t = 1; t <= T; ++t) truncated.push_back(truncate_program(m, t));
  }

  std::vector<NaiveParticle> np;
  std::vector<IterParticle> ip;
  if (iterative) {
    ip.resize(static_cast<size_t>(particles));
    for (int i = 0; i < particles; ++i) {
      IterParticle& p = ip[static_cast<size_t>(i)];
      LogAccum dq0;
      ParticleHandler h(m, p.trace, dq0, seed, i);
      CfgExecResult r =
          run_slice(m.cfg, m.smc_entry, ProgramState::initial(m.cfg.syms.size()), h);
      if (r.paused) {
        p.state = std::move(r.state);
        p.pending = r.paused_node;
      } else if (r.ok) {
        p.state = std::move(r.state);
        p.done = true;
      } else {
        res.error = std::string("entry slice undefined: ") + undef_reason_name(r.reason);
        return res;
      }
    }
  } else {
    np.resize(static_cast<size_t>(particles));
  }

  res.log_z = 0.0;
  for (int t = 1; t <= T; ++t) {
    // Advance every particle through data point t.
    if (iterative) {
      auto advance = [&](int i) {
        IterParticle& p = ip[static_cast<size_t>(i)];
        if (!p.error.empty()) return;
        double start = p.state.log_density();
        LogAccum dq;
        while (!p.done && p.obs_count < t) {
          int k = m.slice_index_of_node(p.pending);
          if (k < 0) {
            p.error = "paused at a non-sample node";
            return;
          }
          ParticleHandler h(m, p.trace, dq, seed, i);
          CfgExecResult r =
              run_slice(m.cfg, m.smc_slices[static_cast<size_t>(k)], std::move(p.state), h);
          if (h.executed && m.is_observed(h.last_addr)) ++p.obs_count;
          if (r.paused) {
            p.state = std::move(r.state);
            p.pending = r.paused_node;
          } else if (r.ok) {
            p.state = std::move(r.state);
            p.done = true;
          } else {
            p.error = std::string("segment undefined: ") + undef_reason_name(r.reason);
            return;
          }
        }
        p.step_weight = (p.state.log_density() - start) - dq.value();
      };
      if (threads <= 1) {
        for (int i = 0; i < particles; ++i) advance(i);
      } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
        for (int i = 0; i < particles; ++i) advance(i);
      }
      for (const IterParticle& p : ip)
        if (!p.error.empty()) {
          res.error = p.error;
          return res;
        }
    } else {
      const Program& pt = truncated[static_cast<size_t>(t - 1)];
      auto advance = [&](int i) {
        NaiveParticle& p = np[static_cast<size_t>(i)];
        if (!p.error.empty()) return;
        LogAccum dq;
        ParticleHandler h(m, p.trace, dq, seed, i);
        ExecResult r = exec(pt, h, ProgramState::initial(pt.syms.size()));
        if (!r.ok) {
          p.error = std::string("truncated run undefined: ") + undef_reason_name(r.reason);
          return;
        }
        double lp = r.state.log_density();
        p.step_weight = (lp - p.prev_logp) - dq.value();
        p.prev_logp = lp;
      };
      if (threads <= 1) {
        for (int i = 0; i < particles; ++i) advance(i);
      } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
        for (int i = 0; i < particles; ++i) advance(i);
      }
      for (const NaiveParticle& p : np)
        if (!p.error.empty()) {
          res.error = p.error;
          return res;
        }
    }

    SmcStep step;
    step.t = t;
    step.weights.resize(static_cast<size_t>(particles));
    for (int i = 0; i < particles; ++i)
      step.weights[static_cast<size_t>(i)] =
          iterative ? ip[static_cast<size_t>(i)].step_weight
                    : np[static_cast<size_t>(i)].step_weight;

    Resample rs = systematic_resample(step.weights, seed, t);
    if (rs.degenerate) {
      res.error = "degenerate particle set (all weights zero) at step " + std::to_string(t);
      return res;
    }
    res.log_z += rs.log_z_inc;
    step.ess = rs.ess;
    step.log_z = res.log_z;
    step.ancestors = rs.ancestors;

    // Resample every step; duplicated particles deep-copy their state.
    if (iterative) {
      std::vector<IterParticle> next(static_cast<size_t>(particles));
      for (int i = 0; i < particles; ++i)
        next[static_cast<size_t>(i)] = ip[static_cast<size_t>(rs.ancestors[static_cast<size_t>(i)])];
      ip = std::move(next);
    } else {
      std::vector<NaiveParticle> next(static_cast<size_t>(particles));
      for (int i = 0; i < particles; ++i)
        next[static_cast<size_t>(i)] = np[static_cast<size_t>(rs.ancestors[static_cast<size_t>(i)])];
      np = std::move(next);
    }
    res.steps.push_back(std::move(step));
  }

  for (int i = 0; i < particles; ++i)
    res.traces.push_back(iterative ? ip[static_cast<size_t>(i)].trace
                                   : np[static_cast<size_t>(i)].trace);
  res.ok = true;
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace ppl
