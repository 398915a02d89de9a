#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ppl/bbvi.hpp"
#include "ppl/lmh.hpp"
#include "ppl/model.hpp"
#include "ppl/parser.hpp"
#include "ppl/smc.hpp"

using nlohmann::json;
using namespace ppl;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_out(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

uint64_t default_seed() {
  if (const char* env = std::getenv("PPL_SEED")) return std::strtoull(env, nullptr, 10);
  return 42;
}

// Digit runs collapse to '*' so per-point addresses aggregate into one row.
std::string summary_pattern(const std::string& addr) {
  std::string out;
  bool in_digits = false;
  for (char c : addr) {
    if (c >= '0' && c <= '9') {
      if (!in_digits) out += '*';
      in_digits = true;
    } else {
      out += c;
      in_digits = false;
    }
  }
  return out;
}

struct PatternStats {
  int64_t count = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++count;
    double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double sd() const { return count > 1 ? std::sqrt(m2 / static_cast<double>(count - 1)) : 0.0; }
};

Model load_by_name_or_path(const std::string& name, const std::string& models_dir,
                           uint64_t seed, int data_size) {
  if (const ModelManifest* mf = find_model(name))
    return load_model(*mf, models_dir, seed, data_size);
  // Ad-hoc file: no manifest, no data schedule.
  ModelManifest mf;
  mf.name = name;
  mf.file = name;
  std::string src = read_file(name);
  return load_model_source(mf, src, seed, data_size);
}

int cmd_parse(const std::string& file, const std::string& out) {
  Program p = parse(read_file(file));
  write_out(out, pretty_print(p));
  return 0;
}

int cmd_cfg(const std::string& file, const std::string& dot) {
  Program p = parse(read_file(file));
  Cfg g = build_cfg(p);
  if (!dot.empty()) {
    write_out(dot, cfg_to_dot(g));
  } else {
    std::cout << "nodes: " << g.nodes.size() << "\nedges: " << g.edge_count()
              << "\nbranch-join pairs: " << g.pairs.size() << "\n";
    std::cout << cfg_to_dot(g);
  }
  return 0;
}

int cmd_analyze(const std::string& file, const std::string& report, const std::string& bayes,
                const std::string& markov) {
  Program p = parse(read_file(file));
  Cfg g = build_cfg(p);
  Analysis an = analyze(g);
  write_out(report, factor_report_json(g, an));
  if (!bayes.empty()) {
    GraphExport bx;
    BayesError err = to_bayes_net(g, an, bx);
    if (err != BayesError::None) {
      std::cerr << "bayes-net export failed: " << bayes_error_name(err)
                << " (program is outside the Bayesian-network fragment)\n";
      return 1;
    }
    write_out(bayes, graph_to_dot(bx));
  }
  if (!markov.empty()) write_out(markov, graph_to_dot(to_markov_net(g, an)));
  return 0;
}

int cmd_slice(const std::string& file, const std::string& at, bool smc, const std::string& dot,
              const std::string& out) {
  Program p = parse(read_file(file));
  Cfg g = build_cfg(p);
  Analysis an = analyze(g);
  int node = -1;
  for (int s : an.samples) {
    const Expr& ae = g.node(s).sample.addr;
    if (ae.kind == Expr::Kind::Const && ae.cval.is_str() && ae.cval.as_str() == at) node = s;
  }
  if (node < 0) {
    for (size_t k = 0; k < an.samples.size(); ++k)
      if (an.factors[k].addr_pattern == at) node = an.samples[k];
  }
  if (node < 0 && !at.empty() && at.find_first_not_of("0123456789") == std::string::npos)
    node = std::stoi(at);
  int k = an.index_of_node(node);
  if (k < 0) {
    std::cerr << "no sample statement with address or node id '" << at << "'\n";
    return 1;
  }
  SlicedProgram sp = smc ? slice_for_smc(g, node) : slice_for_factor(g, an, k);
  write_out(out, slice_dump(g, sp));
  if (!dot.empty()) write_out(dot, slice_to_dot(g, sp));
  return 0;
}

struct RunOpts {
  std::string model, algo, out, summary, weights, models_dir;
  int iters = 1000, particles = 100, data_size = 0, threads = 1;
  uint64_t seed = 42;
  bool timings = false;
};

int cmd_run(const RunOpts& o) {
  Model m = load_by_name_or_path(o.model, o.models_dir, o.seed, o.data_size);
  std::ostringstream stream;
  json summary;
  summary["model"] = m.mf.name;
  summary["algorithm"] = o.algo;
  summary["seed"] = o.seed;
  summary["data_size"] = m.data_size;

  if (o.algo == "lmh" || o.algo == "lmh-fast") {
    LmhChain chain(m, o.algo == "lmh-fast", o.seed);
    std::map<std::string, PatternStats> stats;
    int64_t accepted = 0;
    for (int i = 0; i < o.iters; ++i) {
      auto t0 = std::chrono::steady_clock::now();
      LmhRecord r = chain.step(i);
      auto t1 = std::chrono::steady_clock::now();
      accepted += r.accepted ? 1 : 0;
      json rec;
      rec["iter"] = r.iter;
      rec["address"] = r.address;
      rec["accept_prob"] = r.accept_prob;
      rec["accepted"] = r.accepted;
      rec["log_density"] = r.log_density;
      if (r.undefined_proposal) rec["undefined_proposal"] = true;
      if (o.timings)
        rec["runtime_ns"] =
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
      stream << rec.dump() << "\n";
      for (const auto& [a, v] : chain.trace().entries())
        if (v.is_numeric() && !m.is_observed(a)) stats[summary_pattern(a)].add(v.as_number());
    }
    summary["iterations"] = o.iters;
    summary["acceptance_rate"] =
        o.iters > 0 ? static_cast<double>(accepted) / o.iters : 0.0;
    json pats = json::array();
    for (auto& [pat, st] : stats) {
      json pj;
      pj["pattern"] = pat;
      pj["count"] = st.count;
      pj["mean"] = st.mean;
      pj["sd"] = st.sd();
      pats.push_back(std::move(pj));
    }
    summary["posterior"] = std::move(pats);
  } else if (o.algo == "bbvi" || o.algo == "bbvi-rb") {
    if (!m.mf.bbvi_compatible && find_model(o.model)) {
      std::cerr << "model '" << m.mf.name
                << "' is incompatible with BBVI (random variables with stochastic support "
                   "dimension or distributions without a variational family)\n";
      return 1;
    }
    BbviOptimizeResult res =
        bbvi_optimize(m, o.algo == "bbvi-rb", o.iters, 100, o.seed, 0.05, o.threads);
    if (res.diverged) {
      std::cerr << "bbvi diverged: " << res.diagnostic << "\n";
      return 1;
    }
    for (size_t t = 0; t < res.step_avg_variance.size(); ++t) {
      json rec;
      rec["step"] = t;
      rec["avg_grad_variance"] = res.step_avg_variance[t];
      rec["elbo"] = res.step_elbo[t];
      stream << rec.dump() << "\n";
    }
    json params = json::array();
    for (auto& [addr, e] : res.params.entries) {
      json pj;
      pj["address"] = addr;
      pj["phi"] = e.phi;
      params.push_back(std::move(pj));
    }
    summary["steps"] = o.iters;
    summary["params"] = std::move(params);
    double avg = 0.0;
    for (double v : res.step_avg_variance) avg += v;
    summary["avg_grad_variance"] =
        res.step_avg_variance.empty() ? 0.0 : avg / res.step_avg_variance.size();
  } else if (o.algo == "smc" || o.algo == "smc-iter") {
    if (!m.mf.smc_compatible && find_model(o.model)) {
      std::cerr << "model '" << m.mf.name << "' has no data schedule for SMC\n";
      return 1;
    }
    SmcResult res = smc_run(m, o.algo == "smc-iter", o.particles, o.seed, o.threads);
    if (!res.ok) {
      std::cerr << "smc failed: " << res.error << "\n";
      return 1;
    }
    std::ostringstream wstream;
    for (const SmcStep& s : res.steps) {
      json rec;
      rec["step"] = s.t;
      rec["ess"] = s.ess;
      rec["log_z"] = s.log_z;
      stream << rec.dump() << "\n";
      if (!o.weights.empty()) {
        json wr;
        wr["step"] = s.t;
        wr["weights"] = s.weights;
        wstream << wr.dump() << "\n";
      }
    }
    if (!o.weights.empty()) write_out(o.weights, wstream.str());
    summary["particles"] = o.particles;
    summary["log_z"] = res.log_z;
    std::map<std::string, PatternStats> stats;
    for (const Trace& tr : res.traces)
      for (const auto& [a, v] : tr.entries())
        if (v.is_numeric()) stats[summary_pattern(a)].add(v.as_number());
    json pats = json::array();
    for (auto& [pat, st] : stats) {
      json pj;
      pj["pattern"] = pat;
      pj["count"] = st.count;
      pj["mean"] = st.mean;
      pj["sd"] = st.sd();
      pats.push_back(std::move(pj));
    }
    summary["posterior"] = std::move(pats);
  } else {
    std::cerr << "unknown algorithm '" << o.algo << "'\n";
    return 2;
  }

  write_out(o.out, stream.str());
  if (!o.summary.empty()) write_out(o.summary, summary.dump(2) + "\n");
  return 0;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

struct BenchOpts {
  std::string suite, out, models_csv, models_dir;
  int reps = 3, iters = 2000, particles = 100, data_size = 0;
  uint64_t seed = 42;
};

int cmd_bench(const BenchOpts& o) {
  std::vector<std::string> wanted;
  if (!o.models_csv.empty()) {
    std::stringstream ss(o.models_csv);
    std::string item;
    while (std::getline(ss, item, ',')) wanted.push_back(item);
  }
  json report;
  report["suite"] = o.suite;
  report["seed"] = o.seed;
  report["reps"] = o.reps;
  report["models"] = json::array();

  for (const ModelManifest& mf : corpus()) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), mf.name) == wanted.end())
      continue;
    if (o.suite == "bbvi" && !mf.bbvi_compatible) continue;
    if (o.suite == "smc" && !mf.smc_compatible) continue;
    json mj;
    mj["model"] = mf.name;
    try {
      Model m = load_model(mf, o.models_dir, o.seed, o.data_size);
      mj["data_size"] = m.data_size;
      if (o.suite == "lmh") {
        std::vector<double> base_us, fast_us;
        int64_t accepted = 0, steps = 0;
        for (int rep = 0; rep < o.reps; ++rep) {
          uint64_t seed = o.seed + static_cast<uint64_t>(rep);
          for (int variant = 0; variant < 2; ++variant) {
            LmhChain chain(m, variant == 1, seed);
            int warm = std::min(100, o.iters / 10);
            for (int i = 0; i < warm; ++i) chain.step(i);
            auto& bucket = variant == 0 ? base_us : fast_us;
            for (int i = warm; i < o.iters; ++i) {
              auto t0 = std::chrono::steady_clock::now();
              LmhRecord r = chain.step(i);
              auto t1 = std::chrono::steady_clock::now();
              bucket.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
              if (variant == 0) {
                accepted += r.accepted ? 1 : 0;
                ++steps;
              }
            }
          }
        }
        double bm = 0, fm = 0;
        for (double x : base_us) bm += x;
        for (double x : fast_us) fm += x;
        bm /= std::max<size_t>(1, base_us.size());
        fm /= std::max<size_t>(1, fast_us.size());
        mj["iterations"] = o.iters;
        mj["acceptance_rate"] = steps ? static_cast<double>(accepted) / steps : 0.0;
        mj["baseline_us"] = {{"mean", bm}, {"median", median(base_us)}};
        mj["optimized_us"] = {{"mean", fm}, {"median", median(fast_us)}};
        mj["speedup"] = fm > 0 ? bm / fm : 0.0;
        mj["speedup_median"] = median(fast_us) > 0 ? median(base_us) / median(fast_us) : 0.0;
      } else if (o.suite == "bbvi") {
        double var_std = 0, var_rao = 0, t_std = 0, t_rao = 0;
        for (int rep = 0; rep < o.reps; ++rep) {
          uint64_t seed = o.seed + static_cast<uint64_t>(rep);
          VParams ps, pr;
          auto t0 = std::chrono::steady_clock::now();
          BbviEstimate es = bbvi_gradient(m, ps, false, 100, seed, 0);
          auto t1 = std::chrono::steady_clock::now();
          BbviEstimate er = bbvi_gradient(m, pr, true, 100, seed, 0);
          auto t2 = std::chrono::steady_clock::now();
          var_std += es.avg_variance;
          var_rao += er.avg_variance;
          t_std += std::chrono::duration<double>(t1 - t0).count();
          t_rao += std::chrono::duration<double>(t2 - t1).count();
        }
        var_std /= o.reps;
        var_rao /= o.reps;
        mj["baseline_avg_variance"] = var_std;
        mj["optimized_avg_variance"] = var_rao;
        mj["variance_reduction"] = var_rao > 0 ? var_std / var_rao : HUGE_VAL;
        mj["cost_factor"] = t_std > 0 ? t_rao / t_std : 0.0;
      } else if (o.suite == "smc") {
        double t_naive = 0, t_iter = 0;
        bool weights_equal = true;
        double ess_last = 0;
        for (int rep = 0; rep < o.reps; ++rep) {
          uint64_t seed = o.seed + static_cast<uint64_t>(rep);
          SmcResult rn = smc_run(m, false, o.particles, seed);
          SmcResult ri = smc_run(m, true, o.particles, seed);
          if (!rn.ok || !ri.ok)
            throw std::runtime_error(rn.ok ? ri.error : rn.error);
          t_naive += rn.wall_seconds;
          t_iter += ri.wall_seconds;
          for (size_t t = 0; t < rn.steps.size(); ++t)
            if (rn.steps[t].weights != ri.steps[t].weights) weights_equal = false;
          ess_last = rn.steps.empty() ? 0.0 : rn.steps.back().ess;
        }
        mj["particles"] = o.particles;
        mj["baseline_ms"] = 1e3 * t_naive / o.reps;
        mj["optimized_ms"] = 1e3 * t_iter / o.reps;
        mj["speedup"] = t_iter > 0 ? t_naive / t_iter : 0.0;
        mj["weights_equal"] = weights_equal;
        mj["final_ess"] = ess_last;
      } else {
        std::cerr << "unknown suite '" << o.suite << "'\n";
        return 2;
      }
    } catch (const std::exception& e) {
      mj["error"] = e.what();
    }
    report["models"].push_back(std::move(mj));
  }
  write_out(o.out, report.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ppl: a probabilistic programming language with static density factorisation"};
  app.require_subcommand(1);
  std::string models_dir = models_dir_default();
  app.add_option("--models-dir", models_dir, "corpus directory");

  std::string file, out, dot, report, bayes, markov, at;
  bool smc_slice = false;

  auto* c_models = app.add_subcommand("models", "list the benchmark corpus");

  auto* c_parse = app.add_subcommand("parse", "parse and echo the canonical form");
  c_parse->add_option("file", file)->required();
  c_parse->add_option("--out", out);

  auto* c_cfg = app.add_subcommand("cfg", "build the control-flow graph");
  c_cfg->add_option("file", file)->required();
  c_cfg->add_option("--dot", dot);

  auto* c_an = app.add_subcommand("analyze", "factor sets and graph exports");
  c_an->add_option("file", file)->required();
  c_an->add_option("--report", report);
  c_an->add_option("--bayes", bayes);
  c_an->add_option("--markov", markov);

  auto* c_slice = app.add_subcommand("slice", "per-factor or SMC sub-program");
  c_slice->add_option("file", file)->required();
  c_slice->add_option("--at", at, "sample address or node id")->required();
  c_slice->add_flag("--smc", smc_slice);
  c_slice->add_option("--dot", dot);
  c_slice->add_option("--out", out);

  RunOpts ro;
  ro.seed = default_seed();
  auto* c_run = app.add_subcommand("run", "run an inference algorithm");
  c_run->add_option("model", ro.model, "corpus model name or .ppl path")->required();
  c_run->add_option("--algo", ro.algo, "lmh|lmh-fast|bbvi|bbvi-rb|smc|smc-iter")->required();
  c_run->add_option("-n,--iters", ro.iters);
  c_run->add_option("-p,--particles", ro.particles);
  c_run->add_option("--seed", ro.seed);
  c_run->add_option("--data-size", ro.data_size);
  c_run->add_option("--threads", ro.threads);
  c_run->add_option("--out", ro.out);
  c_run->add_option("--summary", ro.summary);
  c_run->add_option("--weights", ro.weights);
  c_run->add_flag("--timings", ro.timings);

  BenchOpts bo;
  bo.seed = default_seed();
  auto* c_bench = app.add_subcommand("bench", "baseline vs optimised benchmark suite");
  c_bench->add_option("--suite", bo.suite, "lmh|bbvi|smc")->required();
  c_bench->add_option("--reps", bo.reps);
  c_bench->add_option("--iters", bo.iters);
  c_bench->add_option("-p,--particles", bo.particles);
  c_bench->add_option("--seed", bo.seed);
  c_bench->add_option("--data-size", bo.data_size);
  c_bench->add_option("--models", bo.models_csv, "comma-separated subset");
  c_bench->add_option("--out", bo.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_models->parsed()) {
      for (const ModelManifest& m : corpus())
        std::cout << m.name << "\t" << m.file << (m.bbvi_compatible ? "\tbbvi" : "")
                  << (m.smc_compatible ? "\tsmc" : "") << "\n";
      return 0;
    }
    if (c_parse->parsed()) return cmd_parse(file, out);
    if (c_cfg->parsed()) return cmd_cfg(file, dot);
    if (c_an->parsed()) return cmd_analyze(file, report, bayes, markov);
    if (c_slice->parsed()) return cmd_slice(file, at, smc_slice, dot, out);
    if (c_run->parsed()) {
      ro.models_dir = models_dir;
      return cmd_run(ro);
    }
    if (c_bench->parsed()) {
      bo.models_dir = models_dir;
      return cmd_bench(bo);
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
