#include "ppl/lmh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace ppl {

namespace {

Value draw_proposal(const SampleSite& site, const std::vector<Value>& params, uint64_t master,
                    uint64_t step, const std::string& addr) {
  Rng r = Rng::keyed(master, "prop", step, 0, addr);
  return dist_at(site.data->dist).sample(params, r);
}

// Full-program LMH kernel, forward direction (Def. D.4): resample at alpha
// and at fresh addresses, copy everything else from the current trace.
class KernelFwd : public SampleHandler {
public:
  KernelFwd(const Trace& old_tr, std::string alpha, uint64_t master, uint64_t step)
      : old_(old_tr), alpha_(std::move(alpha)), master_(master), step_(step) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    Value v;
    if (addr == alpha_ || old_.lookup(addr).is_null()) {
      v = draw_proposal(site, params, master_, step_, addr);
      if (v.is_null()) return HandleResult::fail(UndefReason::NullParam);
      dq.add(dist_at(site.data->dist).log_pdf(v, params));
      ++proposed;
      proposed_addrs.insert(addr);
    } else {
      v = old_.lookup(addr);
    }
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    ++stats.pdf_evals;
    if (newtr.contains(addr)) duplicate = true;
    newtr.set(addr, v);
    return HandleResult::bind(std::move(v));
  }

  Trace newtr;
  LogAccum dq;
  int proposed = 0;
  std::set<std::string> proposed_addrs;
  bool duplicate = false;

private:
  const Trace& old_;
  std::string alpha_;
  uint64_t master_, step_;
};

// Backward direction: the kernel run that reconstructs the current trace
// from the proposed one (value source is the current trace).
class KernelBwd : public SampleHandler {
public:
  KernelBwd(const Trace& old_tr, const Trace& new_tr, std::string alpha)
      : old_(old_tr), new_(new_tr), alpha_(std::move(alpha)) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    Value v;
    if (addr == alpha_ || new_.lookup(addr).is_null()) {
      v = old_.lookup(addr);
      if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
      dq.add(dist_at(site.data->dist).log_pdf(v, params));
    } else {
      v = new_.lookup(addr);
    }
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    ++stats.pdf_evals;
    return HandleResult::bind(std::move(v));
  }

  LogAccum dq;

private:
  const Trace& old_;
  const Trace& new_;
  std::string alpha_;
};

// ForwardCtx over a factor slice: propose at the visit, propose-if-missing
// at scores, read otherwise; cache the program state at every statement.
class ForwardSliceCtx : public SampleHandler {
public:
  ForwardSliceCtx(const Trace& old_tr, std::string alpha, uint64_t master, uint64_t step)
      : old_(old_tr), alpha_(std::move(alpha)), master_(master), step_(step) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    ckpts.push_back({addr, Checkpoint{st, site.node_id}});
    ++stats.state_copies;
    if (encountered.count(addr)) duplicate = true;

    Value v;
    switch (site.role) {
      case SampleRole::Visit: {
        if (addr != alpha_)
          return HandleResult::fail(UndefReason::NullTraceValue);  // invariant breach
        v = draw_proposal(site, params, master_, step_, addr);
        if (v.is_null()) return HandleResult::fail(UndefReason::NullParam);
        dq.add(dist_at(site.data->dist).log_pdf(v, params));
        ++proposed;
        proposed_addrs.insert(addr);
        break;
      }
      case SampleRole::Score: {
        if (old_.lookup(addr).is_null()) {
          v = draw_proposal(site, params, master_, step_, addr);
          if (v.is_null()) return HandleResult::fail(UndefReason::NullParam);
          dq.add(dist_at(site.data->dist).log_pdf(v, params));
          ++proposed;
          proposed_addrs.insert(addr);
        } else {
          v = old_.lookup(addr);
        }
        break;
      }
      case SampleRole::Read: {
        v = old_.lookup(addr);
        if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
        encountered.insert(addr);
        pairs.push_back({addr, v});
        return HandleResult::bind(std::move(v));  // reads do not touch the density
      }
      case SampleRole::Plain:
        throw std::logic_error("untagged sample node in factor slice");
    }
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    ++stats.pdf_evals;
    encountered.insert(addr);
    pairs.push_back({addr, v});
    return HandleResult::bind(std::move(v));
  }

  std::vector<std::pair<std::string, Value>> pairs;
  std::vector<std::pair<std::string, Checkpoint>> ckpts;
  std::set<std::string> encountered;
  LogAccum dq;
  int proposed = 0;
  std::set<std::string> proposed_addrs;
  bool duplicate = false;

private:
  const Trace& old_;
  std::string alpha_;
  uint64_t master_, step_;
};

// BackwardCtx: evaluates the slice on the current trace; Delta-Q terms only
// for addresses the proposal does not sample.
class BackwardSliceCtx : public SampleHandler {
public:
  BackwardSliceCtx(const Trace& old_tr, const std::set<std::string>& fwd_encountered)
      : old_(old_tr), fwd_(fwd_encountered) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    Value v = old_.lookup(addr);
    if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
    switch (site.role) {
      case SampleRole::Visit:
        dq.add(dist_at(site.data->dist).log_pdf(v, params));
        break;
      case SampleRole::Score:
        if (!fwd_.count(addr)) dq.add(dist_at(site.data->dist).log_pdf(v, params));
        break;
      case SampleRole::Read:
        encountered.push_back(addr);
        return HandleResult::bind(std::move(v));
      case SampleRole::Plain:
        throw std::logic_error("untagged sample node in factor slice");
    }
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    ++stats.pdf_evals;
    encountered.push_back(addr);
    return HandleResult::bind(std::move(v));
  }

  std::vector<std::string> encountered;
  LogAccum dq;

private:
  const Trace& old_;
  const std::set<std::string>& fwd_;
};

// Initial state: forward-sample with observed addresses clamped, recording
// the per-address checkpoints the factored kernel continues from.
class InitHandler : public SampleHandler {
public:
  InitHandler(const Model& m, uint64_t master) : m_(m), master_(master) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    ckpts[addr] = Checkpoint{st, site.node_id};
    ++stats.state_copies;
    Value v = m_.observed.lookup(addr);
    if (v.is_null()) {
      Rng r = Rng::keyed(master_, "init", 0, 0, addr);
      v = dist_at(site.data->dist).sample(params, r);
      if (v.is_null()) return HandleResult::fail(UndefReason::NullParam);
    }
    if (out.contains(addr)) duplicate = true;
    out.set(addr, v);
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    ++stats.pdf_evals;
    return HandleResult::bind(std::move(v));
  }

  Trace out;
  std::unordered_map<std::string, Checkpoint> ckpts;
  bool duplicate = false;

private:
  const Model& m_;
  uint64_t master_;
};

}  // namespace

bool lmh_forward_proposal(const Model& m, const Trace& cur, const std::string& alpha,
                          uint64_t master, uint64_t step, Trace& out) {
  KernelFwd fwd(cur, alpha, master, step);
  CfgExecResult r = cfg_exec(m.cfg, ProgramState::initial(m.cfg.syms.size()), fwd);
  if (!r.ok) return false;
  out = std::move(fwd.newtr);
  return true;
}

LmhChain::LmhChain(const Model& m, bool factored, uint64_t seed)
    : m_(m), factored_(factored), master_(seed) {
  InitHandler h(m, master_);
  CfgExecResult r = cfg_exec(m.cfg, ProgramState::initial(m.cfg.syms.size()), h);
  if (!r.ok) throw std::runtime_error("model initialisation failed: " +
                                      std::string(undef_reason_name(r.reason)));
  trace_ = std::move(h.out);
  ckpts_ = std::move(h.ckpts);
  logp_ = r.state.log_density();
  for (const std::string& k : trace_.keys_sorted())
    if (!m_.is_observed(k)) latents_.push_back(k);
  if (factored_ && (h.duplicate || !m.mf.single_occurrence)) {
    std::fprintf(stderr,
                 "warning: model '%s' violates the single-occurrence assumption; "
                 "falling back to baseline LMH\n",
                 m.mf.name.c_str());
    degraded_ = true;
  }
}

void LmhChain::insert_latent(const std::string& a) {
  auto it = std::lower_bound(latents_.begin(), latents_.end(), a);
  if (it == latents_.end() || *it != a) latents_.insert(it, a);
}

void LmhChain::erase_latent(const std::string& a) {
  auto it = std::lower_bound(latents_.begin(), latents_.end(), a);
  if (it != latents_.end() && *it == a) latents_.erase(it);
}

LmhRecord LmhChain::step(int iter) {
  LmhRecord rec;
  rec.iter = iter;
  rec.log_density = logp_;
  if (latents_.empty()) return rec;
  double u = Rng::keyed(master_, "sel", static_cast<uint64_t>(iter)).next_double();
  size_t idx = std::min(latents_.size() - 1, static_cast<size_t>(u * latents_.size()));
  const std::string alpha = latents_[idx];
  if (factored_ && !degraded_) return step_factored(iter, alpha);
  return step_baseline(iter, alpha);
}

LmhRecord LmhChain::step_baseline(int iter, const std::string& alpha) {
  LmhRecord rec;
  rec.iter = iter;
  rec.address = alpha;

  KernelFwd fwd(trace_, alpha, master_, static_cast<uint64_t>(iter));
  CfgExecResult rf = cfg_exec(m_.cfg, ProgramState::initial(m_.cfg.syms.size()), fwd);
  rec.work_nodes += fwd.stats.steps;
  rec.work_pdf += fwd.stats.pdf_evals;
  rec.proposed_terms = fwd.proposed;
  rec.proposed_addresses = static_cast<int>(fwd.proposed_addrs.size());
  if (!rf.ok) {
    rec.undefined_proposal = true;
    rec.log_density = logp_;
    return rec;
  }

  KernelBwd bwd(trace_, fwd.newtr, alpha);
  CfgExecResult rb = cfg_exec(m_.cfg, ProgramState::initial(m_.cfg.syms.size()), bwd);
  rec.work_nodes += bwd.stats.steps;
  rec.work_pdf += bwd.stats.pdf_evals;
  if (!rb.ok) {
    rec.undefined_proposal = true;
    rec.log_density = logp_;
    return rec;
  }

  double log_ratio = (rf.state.log_density() - rb.state.log_density()) +
                     (bwd.dq.value() - fwd.dq.value());
  rec.accept_prob = std::exp(std::min(0.0, log_ratio));
  double ua = Rng::keyed(master_, "acc", static_cast<uint64_t>(iter)).next_double();
  if (std::log(std::max(ua, 1e-300)) < log_ratio) {
    rec.accepted = true;
    trace_ = std::move(fwd.newtr);
    logp_ = rf.state.log_density();
    latents_.clear();
    for (const std::string& k : trace_.keys_sorted())
      if (!m_.is_observed(k)) latents_.push_back(k);
  }
  rec.log_density = logp_;
  return rec;
}

LmhRecord LmhChain::step_factored(int iter, const std::string& alpha) {
  LmhRecord rec;
  rec.iter = iter;
  rec.address = alpha;

  auto it = ckpts_.find(alpha);
  if (it == ckpts_.end()) throw std::logic_error("missing checkpoint for address " + alpha);
  int k = m_.slice_index_of_node(it->second.node);
  if (k < 0) throw std::logic_error("checkpoint node is not a sample node");
  const SlicedProgram& slice = m_.factor_slices[static_cast<size_t>(k)];

  ProgramState st_f = it->second.state;
  st_f.log_p.reset();
  ForwardSliceCtx fwd(trace_, alpha, master_, static_cast<uint64_t>(iter));
  CfgExecResult rf = run_slice(m_.cfg, slice, std::move(st_f), fwd);
  rec.work_nodes += fwd.stats.steps;
  rec.work_pdf += fwd.stats.pdf_evals;
  rec.proposed_terms = fwd.proposed;
  rec.proposed_addresses = static_cast<int>(fwd.proposed_addrs.size());
  if (!rf.ok) {
    rec.undefined_proposal = true;
    rec.log_density = logp_;
    return rec;
  }
  if (fwd.duplicate) {
    std::fprintf(stderr, "warning: duplicate address in forward slice; falling back to "
                         "baseline LMH\n");
    degraded_ = true;
    return step_baseline(iter, alpha);
  }

  ProgramState st_b = it->second.state;
  st_b.log_p.reset();
  BackwardSliceCtx bwd(trace_, fwd.encountered);
  CfgExecResult rb = run_slice(m_.cfg, slice, std::move(st_b), bwd);
  rec.work_nodes += bwd.stats.steps;
  rec.work_pdf += bwd.stats.pdf_evals;
  if (!rb.ok) {
    rec.undefined_proposal = true;
    rec.log_density = logp_;
    return rec;
  }

  double dp = rf.state.log_density() - rb.state.log_density();
  double log_ratio = dp + (bwd.dq.value() - fwd.dq.value());
  rec.accept_prob = std::exp(std::min(0.0, log_ratio));
  double ua = Rng::keyed(master_, "acc", static_cast<uint64_t>(iter)).next_double();
  if (std::log(std::max(ua, 1e-300)) < log_ratio) {
    rec.accepted = true;
    for (const std::string& a : bwd.encountered) {
      trace_.erase(a);
      ckpts_.erase(a);
      if (!m_.is_observed(a)) erase_latent(a);
    }
    for (auto& [a, v] : fwd.pairs) trace_.set(a, v);
    for (auto& [a, c] : fwd.ckpts) ckpts_[a] = std::move(c);
    for (auto& [a, v] : fwd.pairs)
      if (!m_.is_observed(a)) insert_latent(a);
    logp_ += dp;
  }
  rec.log_density = logp_;
  return rec;
}

}  // namespace ppl
