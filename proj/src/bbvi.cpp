#include "ppl/bbvi.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ppl {

namespace {

struct LatentDraw {
  std::string addr;
  int node = -1;
  Value value;
  VarFamily fam = VarFamily::None;
  std::vector<double> phi_used;
  double log_q = 0.0;
  Checkpoint ckpt;  // captured only for the Rao-Blackwellised estimator
};

struct NewAddr {
  VarFamily fam;
  std::vector<double> phi;
};

// Draws a trace from the mean-field Q by executing the program and sampling
// every latent address from its variational family. Missing addresses use
// the family default (deterministic), and are reported for insertion.
class QDrawHandler : public SampleHandler {
public:
  QDrawHandler(const Model& m, const VParams& params, uint64_t master, uint64_t step, int sidx,
               bool capture)
      : m_(m), params_(params), master_(master), step_(step), sidx_(sidx), capture_(capture) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    const DistEntry& de = dist_at(site.data->dist);
    Value obs = m_.observed.lookup(addr);
    if (!obs.is_null()) {
      st.log_p.add(de.log_pdf(obs, params));
      ++stats.pdf_evals;
      tr.set(addr, obs);
      return HandleResult::bind(std::move(obs));
    }
    if (de.family == VarFamily::None) {
      error = "address '" + addr + "' has distribution " + de.name +
              " with no variational family";
      return HandleResult::fail(UndefReason::NullParam);
    }
    LatentDraw d;
    d.addr = addr;
    d.node = site.node_id;
    d.fam = de.family;
    auto it = params_.entries.find(addr);
    if (it != params_.entries.end()) {
      if (it->second.fam != de.family ||
          static_cast<int>(it->second.phi.size()) != FamilyOps::dim(de.family, params)) {
        error = "address '" + addr + "' changed family or support dimension";
        return HandleResult::fail(UndefReason::NullParam);
      }
      d.phi_used = it->second.phi;
    } else {
      d.phi_used = FamilyOps::init(de.family, params);
      new_addrs.push_back({addr, NewAddr{de.family, d.phi_used}});
    }
    if (capture_) {
      d.ckpt = Checkpoint{st, site.node_id};
      ++stats.state_copies;
    }
    Rng r = Rng::keyed(master_, "bbvi", step_, static_cast<uint64_t>(sidx_), addr);
    Value v = FamilyOps::sample(de.family, d.phi_used, r);
    if (v.is_null()) {
      error = "variational family produced no value at '" + addr + "'";
      return HandleResult::fail(UndefReason::NullParam);
    }
    d.value = v;
    d.log_q = FamilyOps::log_q(de.family, d.phi_used, v);
    log_q_total += d.log_q;
    st.log_p.add(de.log_pdf(v, params));
    ++stats.pdf_evals;
    tr.set(addr, v);
    draws.push_back(std::move(d));
    return HandleResult::bind(std::move(v));
  }

  Trace tr;
  std::vector<LatentDraw> draws;
  std::vector<std::pair<std::string, NewAddr>> new_addrs;
  double log_q_total = 0.0;
  std::string error;

private:
  const Model& m_;
  const VParams& params_;
  uint64_t master_, step_;
  int sidx_;
  bool capture_;
};

// BBVICtx (Appendix D.5): visit adds log pdf_f - log q_alpha, score adds
// log pdf_f, read contributes nothing; all values come from the trace.
class BbviSliceCtx : public SampleHandler {
public:
  explicit BbviSliceCtx(const Trace& tr) : tr_(tr) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    Value v = tr_.lookup(addr);
    if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
    if (site.role == SampleRole::Read) return HandleResult::bind(std::move(v));
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    ++stats.pdf_evals;
    return HandleResult::bind(std::move(v));
  }

private:
  const Trace& tr_;
};

struct SampleResult {
  // Per-address gradient term of this one sample.
  std::vector<std::pair<std::string, std::vector<double>>> terms;
  std::vector<std::pair<std::string, NewAddr>> new_addrs;
  double elbo = 0.0;
  std::string error;
};

SampleResult one_sample(const Model& m, const VParams& params, bool rao, uint64_t master,
                        uint64_t step, int sidx) {
  SampleResult out;
  QDrawHandler h(m, params, master, step, sidx, rao);
  CfgExecResult r = cfg_exec(m.cfg, ProgramState::initial(m.cfg.syms.size()), h);
  if (!h.error.empty()) {
    out.error = h.error;
    return out;
  }
  if (!r.ok) {
    out.error = std::string("Q-drawn trace has undefined density (") +
                undef_reason_name(r.reason) + ")";
    return out;
  }
  double log_p = r.state.log_density();
  out.elbo = log_p - h.log_q_total;
  out.new_addrs = std::move(h.new_addrs);

  for (const LatentDraw& d : h.draws) {
    std::vector<double> score = FamilyOps::grad_log_q(d.fam, d.phi_used, d.value);
    double weight;
    if (!rao) {
      weight = log_p - h.log_q_total;
    } else {
      int k = m.an.index_of_node(d.node);
      if (k < 0) {
        out.error = "draw at non-sample node";
        return out;
      }
      ProgramState st = d.ckpt.state;
      st.log_p.reset();
      BbviSliceCtx ctx(h.tr);
      CfgExecResult sr = run_slice(m.cfg, m.factor_slices[static_cast<size_t>(k)],
                                   std::move(st), ctx);
      if (!sr.ok) {
        out.error = std::string("BBVI slice run undefined (") +
                    undef_reason_name(sr.reason) + ")";
        return out;
      }
      weight = sr.state.log_density() - d.log_q;
    }
    for (double& g : score) g *= weight;
    out.terms.push_back({d.addr, std::move(score)});
  }
  return out;
}

}  // namespace

BbviEstimate bbvi_gradient(const Model& m, VParams& params, bool rao, int n_samples,
                           uint64_t master, uint64_t step, int threads) {
  std::vector<SampleResult> slots(static_cast<size_t>(n_samples));
  if (threads <= 1) {
    for (int s = 0; s < n_samples; ++s)
      slots[static_cast<size_t>(s)] = one_sample(m, params, rao, master, step, s);
  } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
    for (int s = 0; s < n_samples; ++s)
      slots[static_cast<size_t>(s)] = one_sample(m, params, rao, master, step, s);
  }

  for (const SampleResult& sr : slots)
    if (!sr.error.empty()) throw std::runtime_error("bbvi: " + sr.error);

  // Register lazily discovered addresses (deterministic: map order).
  for (const SampleResult& sr : slots)
    for (const auto& [addr, na] : sr.new_addrs)
      if (!params.entries.count(addr)) {
        VParamEntry e;
        e.fam = na.fam;
        e.phi = na.phi;
        e.adam_m.assign(na.phi.size(), 0.0);
        e.adam_v.assign(na.phi.size(), 0.0);
        params.entries[addr] = std::move(e);
      }

  BbviEstimate est;
  est.n_samples = n_samples;
  double n = static_cast<double>(n_samples);
  // Mean and variance per parameter component; samples without the address
  // contribute zero terms (the delta gate of the estimator).
  std::map<std::string, std::vector<double>> sum, sumsq;
  for (const SampleResult& sr : slots) {
    est.elbo += sr.elbo / n;
    for (const auto& [addr, term] : sr.terms) {
      auto& s = sum[addr];
      auto& s2 = sumsq[addr];
      if (s.empty()) {
        s.assign(term.size(), 0.0);
        s2.assign(term.size(), 0.0);
      }
      for (size_t i = 0; i < term.size(); ++i) {
        s[i] += term[i];
        s2[i] += term[i] * term[i];
      }
    }
  }
  double var_total = 0.0;
  int var_count = 0;
  for (auto& [addr, s] : sum) {
    std::vector<double> g(s.size()), v(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
      double mean = s[i] / n;
      g[i] = mean;
      v[i] = sumsq[addr][i] / n - mean * mean;
      if (v[i] < 0.0) v[i] = 0.0;
      var_total += v[i];
      ++var_count;
    }
    est.grad[addr] = std::move(g);
    est.variance[addr] = std::move(v);
  }
  est.avg_variance = var_count ? var_total / var_count : 0.0;
  return est;
}

BbviOptimizeResult bbvi_optimize(const Model& m, bool rao, int steps, int samples_per_step,
                                 uint64_t seed, double lr, int threads) {
  BbviOptimizeResult out;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 0; t < steps; ++t) {
    BbviEstimate est = bbvi_gradient(m, out.params, rao, samples_per_step, seed,
                                     static_cast<uint64_t>(t), threads);
    out.step_avg_variance.push_back(est.avg_variance);
    out.step_elbo.push_back(est.elbo);
    double corr1 = 1.0 - std::pow(b1, t + 1);
    double corr2 = 1.0 - std::pow(b2, t + 1);
    for (auto& [addr, e] : out.params.entries) {
      auto it = est.grad.find(addr);
      if (it == est.grad.end()) continue;
      const std::vector<double>& g = it->second;
      for (size_t i = 0; i < e.phi.size() && i < g.size(); ++i) {
        e.adam_m[i] = b1 * e.adam_m[i] + (1.0 - b1) * g[i];
        e.adam_v[i] = b2 * e.adam_v[i] + (1.0 - b2) * g[i] * g[i];
        e.phi[i] += lr * (e.adam_m[i] / corr1) / (std::sqrt(e.adam_v[i] / corr2) + eps);
        if (!std::isfinite(e.phi[i])) {
          out.diverged = true;
          out.diagnostic = "non-finite parameter at '" + addr + "' component " +
                           std::to_string(i) + " after step " + std::to_string(t);
          return out;
        }
      }
    }
  }
  return out;
}

}  // namespace ppl
