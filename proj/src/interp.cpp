#include "ppl/interp.hpp"

#include <algorithm>

#include "ppl/builtins.hpp"

namespace ppl {

const Value Trace::null_{};

std::vector<std::string> Trace::keys_sorted() const {
  std::vector<std::string> ks;
  ks.reserve(m_.size());
  for (const auto& [k, v] : m_) ks.push_back(k);
  std::sort(ks.begin(), ks.end());
  return ks;
}

const char* undef_reason_name(UndefReason r) {
  switch (r) {
    case UndefReason::None: return "none";
    case UndefReason::NullParam: return "null-param";
    case UndefReason::NullTraceValue: return "null-trace-value";
    case UndefReason::NonStringAddress: return "non-string-address";
    case UndefReason::NonBoolCondition: return "non-bool-condition";
    case UndefReason::StepBudget: return "step-budget-exhausted";
  }
  return "?";
}

Value eval_expr(const ProgramState& st, const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Const:
      return e.cval;
    case Expr::Kind::Var:
      return st.vars[static_cast<size_t>(e.var_slot)];
    case Expr::Kind::Call: {
      std::vector<Value> args;
      args.reserve(e.args.size());
      for (const Expr& a : e.args) args.push_back(eval_expr(st, a));
      return builtin_apply(e.builtin, args);
    }
  }
  return Value::null();
}

HandleResult DensityHandler::on_sample(const SampleSite& site, const std::string& addr,
                                       const std::vector<Value>& params, ProgramState& st) {
  const Value& v = tr_.lookup(addr);
  if (v.is_null()) return HandleResult::fail(UndefReason::NullTraceValue);
  st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
  ++stats.pdf_evals;
  return HandleResult::bind(v);
}

namespace {

struct Interp {
  SampleHandler& handler;
  uint64_t budget;
  uint64_t steps = 0;
  UndefReason fail = UndefReason::None;

  bool out_of_budget() {
    if (++steps > budget) {
      fail = UndefReason::StepBudget;
      return true;
    }
    return false;
  }

  // Returns false when execution became undefined.
  bool run(const Stmt& s, ProgramState& st) {
    switch (s.kind) {
      case Stmt::Kind::Skip:
        return !out_of_budget();
      case Stmt::Kind::Assign: {
        if (out_of_budget()) return false;
        st.vars[static_cast<size_t>(s.var_slot)] = eval_expr(st, s.expr);
        return true;
      }
      case Stmt::Kind::Seq:
        return run(*s.kids[0], st) && run(*s.kids[1], st);
      case Stmt::Kind::If: {
        if (out_of_budget()) return false;
        bool ok = false;
        bool c = eval_expr(st, s.expr).truthy(&ok);
        if (!ok) {
          fail = UndefReason::NonBoolCondition;
          return false;
        }
        return run(c ? *s.kids[0] : *s.kids[1], st);
      }
      case Stmt::Kind::While: {
        while (true) {
          if (out_of_budget()) return false;
          bool ok = false;
          bool c = eval_expr(st, s.expr).truthy(&ok);
          if (!ok) {
            fail = UndefReason::NonBoolCondition;
            return false;
          }
          if (!c) return true;
          if (!run(*s.kids[0], st)) return false;
        }
      }
      case Stmt::Kind::Sample: {
        if (out_of_budget()) return false;
        Value av = eval_expr(st, s.sample.addr);
        if (av.is_null()) {
          fail = UndefReason::NullParam;
          return false;
        }
        if (!av.is_str()) {
          fail = UndefReason::NonStringAddress;
          return false;
        }
        std::vector<Value> params;
        params.reserve(s.sample.params.size());
        for (const Expr& pe : s.sample.params) {
          params.push_back(eval_expr(st, pe));
          if (params.back().is_null()) {
            fail = UndefReason::NullParam;
            return false;
          }
        }
        SampleSite site;
        site.data = &s.sample;
        site.var_slot = s.var_slot;
        site.line = s.line;
        HandleResult r = handler.on_sample(site, av.as_str(), params, st);
        if (r.act == HandleResult::Act::Fail) {
          fail = r.reason;
          return false;
        }
        st.vars[static_cast<size_t>(s.var_slot)] = std::move(r.value);
        return true;
      }
    }
    return false;
  }
};

}  // namespace

ExecResult exec(const Program& p, SampleHandler& handler, ProgramState init,
                uint64_t step_budget) {
  Interp in{handler, step_budget};
  ExecResult res;
  res.state = std::move(init);
  if (in.run(*p.body, res.state)) {
    res.ok = true;
  } else {
    res.ok = false;
    res.reason = in.fail;
  }
  handler.stats.steps += in.steps;
  return res;
}

ExecResult exec(const Program& p, const Trace& tr, ProgramState init, uint64_t step_budget) {
  DensityHandler h(tr);
  return exec(p, h, std::move(init), step_budget);
}

DensityResult density(const Program& p, const Trace& tr, uint64_t step_budget) {
  ExecResult r = exec(p, tr, ProgramState::initial(p), step_budget);
  DensityResult d;
  d.defined = r.ok;
  d.reason = r.reason;
  d.log_density = r.ok ? r.state.log_density() : 0.0;
  return d;
}

namespace {

class ForwardHandler : public SampleHandler {
public:
  ForwardHandler(Rng& rng, const Trace* clamp) : rng_(rng), clamp_(clamp) {}

  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override {
    Value v;
    if (clamp_ && !clamp_->lookup(addr).is_null()) {
      v = clamp_->lookup(addr);
    } else {
      v = dist_at(site.data->dist).sample(params, rng_);
      if (v.is_null()) return HandleResult::fail(UndefReason::NullParam);
    }
    st.log_p.add(dist_at(site.data->dist).log_pdf(v, params));
    ++stats.pdf_evals;
    out.set(addr, v);
    return HandleResult::bind(std::move(v));
  }

  Trace out;

private:
  Rng& rng_;
  const Trace* clamp_;
};

}  // namespace

ForwardResult sample_forward(const Program& p, Rng& rng, const Trace* clamp,
                             uint64_t step_budget) {
  ForwardHandler h(rng, clamp);
  ExecResult r = exec(p, h, ProgramState::initial(p), step_budget);
  ForwardResult f;
  f.ok = r.ok;
  f.reason = r.reason;
  if (r.ok) {
    f.trace = std::move(h.out);
    f.log_density = r.state.log_density();
  }
  return f;
}

}  // namespace ppl
