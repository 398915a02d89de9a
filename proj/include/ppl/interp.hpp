#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ppl/ast.hpp"
#include "ppl/distributions.hpp"
#include "ppl/rng.hpp"
#include "ppl/value.hpp"

namespace ppl {

// Finite map from addresses to values; absent addresses read as Null.
class Trace {
public:
  const Value& lookup(const std::string& addr) const {
    auto it = m_.find(addr);
    return it == m_.end() ? null_ : it->second;
  }
  void set(const std::string& addr, Value v) {
    if (v.is_null()) m_.erase(addr);
    else m_[addr] = std::move(v);
  }
  void erase(const std::string& addr) { m_.erase(addr); }
  bool contains(const std::string& addr) const { return m_.count(addr) != 0; }
  size_t size() const { return m_.size(); }
  const std::unordered_map<std::string, Value>& entries() const { return m_; }
  std::vector<std::string> keys_sorted() const;

private:
  std::unordered_map<std::string, Value> m_;
  static const Value null_;
};

// Program state: one slot per interned variable plus the reserved density
// accumulator (slot 0 stays Null; the accumulator lives in log_p).
struct ProgramState {
  std::vector<Value> vars;
  LogAccum log_p;

  static ProgramState initial(const Program& p) { return initial(p.syms.size()); }
  static ProgramState initial(int nvars) {
    ProgramState st;
    st.vars.assign(static_cast<size_t>(nvars), Value::null());
    return st;
  }
  double log_density() const { return log_p.value(); }
};

enum class UndefReason {
  None,
  NullParam,
  NullTraceValue,
  NonStringAddress,
  NonBoolCondition,
  StepBudget,
};

const char* undef_reason_name(UndefReason r);

struct ExecStats {
  uint64_t steps = 0;
  uint64_t pdf_evals = 0;
  uint64_t state_copies = 0;
};

enum class SampleRole { Plain, Visit, Score, Read };

struct SampleSite {
  int node_id = -1;            // CFG node id, -1 in the big-step interpreter
  SampleRole role = SampleRole::Plain;
  const SampleData* data = nullptr;
  int var_slot = -1;
  int line = 0;
};

struct HandleResult {
  enum class Act { Bind, Fail };
  Act act = Act::Bind;
  Value value;
  UndefReason reason = UndefReason::None;

  static HandleResult bind(Value v) { return {Act::Bind, std::move(v), UndefReason::None}; }
  static HandleResult fail(UndefReason r) { return {Act::Fail, Value(), r}; }
};

// Dispatch point for sample statements. The executor has already evaluated
// the address (a non-null string) and the parameters (all non-null); the
// handler picks the value, accumulates density/proposal terms, and may
// capture the pre-statement state. The returned value is bound by the
// executor.
class SampleHandler {
public:
  virtual ~SampleHandler() = default;
  virtual HandleResult on_sample(const SampleSite& site, const std::string& addr,
                                 const std::vector<Value>& params, ProgramState& st) = 0;
  ExecStats stats;
};

// Standard density semantics: inject tr(addr), multiply the density.
class DensityHandler : public SampleHandler {
public:
  explicit DensityHandler(const Trace& tr) : tr_(tr) {}
  HandleResult on_sample(const SampleSite& site, const std::string& addr,
                         const std::vector<Value>& params, ProgramState& st) override;

private:
  const Trace& tr_;
};

constexpr uint64_t kDefaultStepBudget = 10'000'000;

struct ExecResult {
  bool ok = false;
  UndefReason reason = UndefReason::None;
  ProgramState state;

  bool undefined() const { return !ok; }
};

// Total expression evaluation against a state.
Value eval_expr(const ProgramState& st, const Expr& e);

// Big-step interpreter for the whole program (section 2 semantics).
ExecResult exec(const Program& p, SampleHandler& handler, ProgramState init,
                uint64_t step_budget = kDefaultStepBudget);
ExecResult exec(const Program& p, const Trace& tr, ProgramState init,
                uint64_t step_budget = kDefaultStepBudget);

struct DensityResult {
  bool defined = false;
  UndefReason reason = UndefReason::None;
  double log_density = 0.0;
};

DensityResult density(const Program& p, const Trace& tr,
                      uint64_t step_budget = kDefaultStepBudget);

// Forward sampling: draws every encountered address from its prior, except
// addresses already fixed in `clamp` (observed data), which are injected.
// The returned trace is minimal when each address is generated by at most
// one sample occurrence.
struct ForwardResult {
  bool ok = false;
  UndefReason reason = UndefReason::None;
  Trace trace;
  double log_density = 0.0;
};

ForwardResult sample_forward(const Program& p, Rng& rng, const Trace* clamp = nullptr,
                             uint64_t step_budget = kDefaultStepBudget);

}  // namespace ppl
