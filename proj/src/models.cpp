#include "ppl/model.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ppl/parser.hpp"

namespace ppl {

namespace {

void gen_none(uint64_t, int, Trace&) {}

void gen_hurricane(uint64_t, int, Trace& out) {
  out.set("D0", Value::integer(1));
  out.set("D1", Value::integer(0));
}

void gen_fig5_p3(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("fig5p3")));
  for (int i = 0; i < size; ++i) {
    double m = r.next_double() < 0.5 ? -2.0 : 2.0;
    out.set("x" + std::to_string(i), Value::real(m + r.next_normal()));
  }
}

void gen_gmm(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("gmm")));
  const double means[3] = {-4.0, 0.0, 4.0};
  for (int i = 0; i < size; ++i) {
    int z = static_cast<int>(r.next_u64() % 3);
    out.set("obs_" + std::to_string(i), Value::real(means[z] + r.next_normal()));
  }
}

void gen_hmm(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("hmm")));
  int s = 0;
  for (int i = 0; i < size; ++i) {
    double p1 = s == 0 ? 0.3 : 0.7;
    s = r.next_double() < p1 ? 1 : 0;
    out.set("obs_" + std::to_string(i), Value::real((s == 1 ? 2.0 : -2.0) + r.next_normal()));
  }
}

void gen_hmm_unrolled(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("hmm-unrolled")));
  int s = 0;
  for (int i = 0; i < size; ++i) {
    double p1 = s == 0 ? 0.3 : 0.7;
    s = r.next_double() < p1 ? 1 : 0;
    out.set("obs_" + std::to_string(i), Value::real((s == 1 ? 2.0 : -2.0) + r.next_normal()));
  }
}

void gen_lda(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("lda")));
  // Three topics over a five-word vocabulary, topic mixed per ten-word doc.
  const double topic[3][5] = {{0.5, 0.3, 0.1, 0.05, 0.05},
                              {0.05, 0.1, 0.5, 0.3, 0.05},
                              {0.05, 0.05, 0.1, 0.3, 0.5}};
  int z = 0;
  for (int i = 0; i < size; ++i) {
    if (i % 10 == 0) z = static_cast<int>(r.next_u64() % 3);
    double u = r.next_double(), acc = 0.0;
    int w = 4;
    for (int v = 0; v < 5; ++v) {
      acc += topic[z][v];
      if (u < acc) {
        w = v;
        break;
      }
    }
    out.set("w_" + std::to_string(i), Value::integer(w));
  }
}

void gen_linreg(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("linreg")));
  for (int i = 0; i < size; ++i) {
    double x = 0.1 * i;
    out.set("obs_" + std::to_string(i), Value::real(1.5 * x + 0.5 + r.next_normal()));
  }
}

void gen_marsaglia(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("marsaglia")));
  for (int i = 0; i < size; ++i)
    out.set("obs_" + std::to_string(i), Value::real(1.2 + r.next_normal()));
}

void gen_dp(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("dp")));
  const double means[3] = {-5.0, 0.0, 5.0};
  for (int i = 0; i < size; ++i) {
    int z = static_cast<int>(r.next_u64() % 3);
    out.set("obs_" + std::to_string(i), Value::real(means[z] + r.next_normal()));
  }
}

void gen_urn(uint64_t seed, int size, Trace& out) {
  Rng r(Rng::mix(seed, Rng::hash_str("urn")));
  for (int i = 0; i < size; ++i)
    out.set("obs_" + std::to_string(i), Value::integer(r.next_double() < 0.6 ? 1 : 0));
}

void gen_pedestrian(uint64_t, int, Trace& out) { out.set("obs", Value::real(1.1)); }

const std::vector<ModelManifest> kCorpus = {
    {"geometric", "geometric.ppl", true, true, false, "", 0, "", gen_none},
    {"branching", "branching.ppl", true, false, false, "", 0, "", gen_none},
    {"branching_dyn", "branching_dyn.ppl", true, false, false, "", 0, "", gen_none},
    {"poisson_address", "poisson_address.ppl", true, false, false, "", 0, "", gen_none},
    {"hurricane", "hurricane.ppl", true, true, false, "", 0, "D", gen_hurricane},
    {"fig4", "fig4.ppl", true, false, false, "", 0, "", gen_none},
    {"fig5_program1", "fig5_program1.ppl", true, false, false, "", 0, "", gen_none},
    {"fig5_program2", "fig5_program2.ppl", true, false, false, "", 0, "", gen_none},
    {"fig5_program3", "fig5_program3.ppl", true, true, true, "n_data", 10, "x", gen_fig5_p3},
    {"gmm_fixed", "gmm_fixed.ppl", true, true, true, "n_data", 100, "obs_", gen_gmm},
    {"gmm_variable", "gmm_variable.ppl", true, false, true, "n_data", 100, "obs_", gen_gmm},
    {"hmm", "hmm.ppl", true, true, true, "n_data", 50, "obs_", gen_hmm},
    {"hmm_unrolled", "hmm_unrolled.ppl", true, true, false, "", 20, "obs_", gen_hmm_unrolled},
    {"lda_fixed", "lda_fixed.ppl", true, true, true, "n_data", 100, "w_", gen_lda},
    {"linreg", "linreg.ppl", true, true, true, "n_data", 100, "obs_", gen_linreg},
    {"marsaglia", "marsaglia.ppl", true, false, false, "n_data", 50, "obs_", gen_marsaglia},
    {"dirichlet_process", "dirichlet_process.ppl", true, true, true, "n_data", 50, "obs_",
     gen_dp},
    {"urn", "urn.ppl", true, false, true, "n_data", 15, "obs_", gen_urn},
    {"pedestrian", "pedestrian.ppl", true, false, false, "", 0, "obs", gen_pedestrian},
};

void patch_size_var(Stmt& s, int slot, int value) {
  if (s.kind == Stmt::Kind::Assign && s.var_slot == slot &&
      s.expr.kind == Expr::Kind::Const && s.expr.cval.is_int()) {
    s.expr = Expr::constant(Value::integer(value));
  }
  for (auto& k : s.kids) patch_size_var(*k, slot, value);
}

Model finish_model(const ModelManifest& mf, Program prog, uint64_t data_seed, int size) {
  Model m;
  m.mf = mf;
  m.data_seed = data_seed;
  m.data_size = size;
  if (!mf.size_var.empty()) {
    int slot = prog.syms.lookup(mf.size_var);
    if (slot < 0)
      throw std::runtime_error("model " + mf.name + ": size variable '" + mf.size_var +
                               "' not found");
    patch_size_var(*prog.body, slot, size);
  }
  m.prog = std::move(prog);
  m.cfg = build_cfg(m.prog);
  m.an = analyze(m.cfg);
  for (size_t k = 0; k < m.an.samples.size(); ++k) {
    m.factor_slices.push_back(slice_for_factor(m.cfg, m.an, static_cast<int>(k)));
    m.smc_slices.push_back(slice_for_smc(m.cfg, m.an.samples[k]));
  }
  m.smc_entry = slice_for_smc(m.cfg, -1);
  if (mf.gen) mf.gen(data_seed, size, m.observed);
  return m;
}

}  // namespace

const std::vector<ModelManifest>& corpus() { return kCorpus; }

const ModelManifest* find_model(const std::string& name) {
  for (const ModelManifest& m : kCorpus)
    if (m.name == name) return &m;
  return nullptr;
}

std::string models_dir_default() {
  if (const char* env = std::getenv("PPL_MODELS_DIR")) return env;
#ifdef PPL_DEFAULT_MODELS_DIR
  return PPL_DEFAULT_MODELS_DIR;
#else
  return "models";
#endif
}

Model load_model(const ModelManifest& mf, const std::string& models_dir, uint64_t data_seed,
                 int size_override) {
  std::string path = models_dir + "/" + mf.file;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  int size = size_override > 0 ? size_override : mf.default_size;
  return finish_model(mf, parse(ss.str()), data_seed, size);
}

Model load_model_source(const ModelManifest& mf, const std::string& source, uint64_t data_seed,
                        int size_override) {
  int size = size_override > 0 ? size_override : mf.default_size;
  return finish_model(mf, parse(source), data_seed, size);
}

Program truncate_program(const Model& m, int t) {
  Program p = m.prog.clone();
  int slot = p.syms.lookup(m.mf.size_var);
  if (slot >= 0) patch_size_var(*p.body, slot, t);
  return p;
}

}  // namespace ppl
