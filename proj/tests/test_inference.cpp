#include "doctest.h"

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "ppl/bbvi.hpp"
#include "ppl/lmh.hpp"
#include "ppl/smc.hpp"

using namespace ppl;
using namespace ppl::test;

TEST_CASE("LMH: prior-proposal on a prior-only model accepts with probability 1") {
  Model m = model_from_source("prior_only", "x = sample(\"x\", Normal(0.0, 1.0))");
  LmhChain chain(m, false, 9);
  for (int i = 0; i < 50; ++i) {
    LmhRecord r = chain.step(i);
    CHECK(r.accept_prob == 1.0);
    CHECK(r.accepted);
  }
}

TEST_CASE("LMH: geometric proposal extends the loop with fresh addresses") {
  // From tr = {b_1: 1, b_2: 0}, proposing 1 at b_2 must sample b_3, b_4, ...
  Model m = corpus_model("geometric");
  bool seen_extension = false;
  for (uint64_t seed = 0; seed < 40 && !seen_extension; ++seed) {
    LmhChain chain(m, false, seed);
    for (int i = 0; i < 40; ++i) {
      size_t before = chain.trace().size();
      LmhRecord r = chain.step(i);
      if (r.accepted && chain.trace().size() > before) seen_extension = true;
    }
  }
  CHECK(seen_extension);
}

TEST_CASE("LMH: empirical acceptance matches the enumerated transition matrix") {
  // Single Bernoulli(0.3): traces {x:0} and {x:1}; prior proposal. The
  // enumerated kernel acceptance is 1 in both directions (ratio cancels).
  Model m = model_from_source("bern", "x = sample(\"x\", Bernoulli(0.3))");
  LmhChain chain(m, false, 3);
  int ones = 0, steps = 20000;
  for (int i = 0; i < steps; ++i) {
    LmhRecord r = chain.step(i);
    CHECK(close(r.accept_prob, 1.0, 1e-12));
    ones += chain.trace().lookup("x").as_int();
  }
  // Chain must mix to the prior: P(x=1) = 0.3 within 3 standard errors.
  double se = std::sqrt(0.3 * 0.7 / steps) * 3 + 0.02;
  CHECK(close(static_cast<double>(ones) / steps, 0.3, se));
}

TEST_CASE("LMH exact-match: baseline and factored agree step by step") {
  for (auto& [name, size] : property_corpus()) {
    Model m = corpus_model(name, 1, std::min(size, 15));
    LmhChain base(m, false, 21), fast(m, true, 21);
    for (int i = 0; i < 300; ++i) {
      LmhRecord a = base.step(i);
      LmhRecord b = fast.step(i);
      REQUIRE_MESSAGE(a.address == b.address, name, " step ", i);
      REQUIRE_MESSAGE(a.accepted == b.accepted, name, " step ", i);
      CHECK_MESSAGE(close(a.accept_prob, b.accept_prob, 1e-12), name, " step ", i,
                    " probs ", a.accept_prob, " vs ", b.accept_prob);
    }
    // Identical trace maps at the end.
    CHECK(base.trace().size() == fast.trace().size());
    for (auto& [k, v] : base.trace().entries())
      CHECK_MESSAGE(fast.trace().lookup(k).equals(v), name, ": trace differs at ", k);
  }
}

TEST_CASE("LMH factored does strictly less work than baseline on GMM allocations") {
  Model m = corpus_model("gmm_fixed", 1, 60);
  LmhChain base(m, false, 5), fast(m, true, 5);
  uint64_t base_pdf = 0, fast_pdf = 0;
  for (int i = 0; i < 150; ++i) {
    base_pdf += base.step(i).work_pdf;
    fast_pdf += fast.step(i).work_pdf;
  }
  CHECK(fast_pdf * 3 < base_pdf);  // far fewer pdf evaluations per step
}

TEST_CASE("LMH minimality is preserved by accepted steps") {
  for (const char* name : {"geometric", "fig4", "urn", "poisson_address"}) {
    Model m = corpus_model(name, 1, 6);
    LmhChain chain(m, true, 77);
    for (int i = 0; i < 60; ++i) {
      LmhRecord r = chain.step(i);
      if (r.accepted && i % 7 == 0) {
        Trace latent_and_obs = chain.trace();
        CHECK_MESSAGE(is_minimal(m, latent_and_obs), name, " step ", i);
      }
    }
  }
}

TEST_CASE("ForwardCtx proposal bookkeeping: one Delta-Q term per proposed address") {
  for (const char* name : {"geometric", "gmm_fixed", "hurricane", "urn"}) {
    Model m = corpus_model(name, 1, 10);
    LmhChain chain(m, true, 13);
    for (int i = 0; i < 100; ++i) {
      LmhRecord r = chain.step(i);
      if (!r.undefined_proposal) CHECK(r.proposed_terms == r.proposed_addresses);
      CHECK(r.proposed_terms >= (chain.degraded() ? 1 : 1));
    }
  }
}

TEST_CASE("BBVI standard estimator: zero-gradient fixed point of Bernoulli(0.5)") {
  Model m = model_from_source("bern_half", "x = sample(\"x\", Bernoulli(0.5))");
  VParams params;
  BbviEstimate est = bbvi_gradient(m, params, false, 500, 99, 0);
  REQUIRE(est.grad.count("x"));
  // log p(x) == log q(x) for both outcomes: every score term is exactly zero.
  CHECK(est.grad["x"][0] == 0.0);
  CHECK(est.variance["x"][0] == 0.0);
}

TEST_CASE("BBVI estimators match the exact Bernoulli enumeration gradient") {
  // Model: x ~ Bernoulli(0.3); q = Bernoulli(logit phi). At phi = 0.4,
  // dELBO/dphi enumerates exactly.
  Model m = model_from_source("bern3", "x = sample(\"x\", Bernoulli(0.3))");
  double phi = 0.4;
  double q1 = 1.0 / (1.0 + std::exp(-phi));
  double exact = 0.0;
  for (int x = 0; x < 2; ++x) {
    double qx = x ? q1 : 1 - q1;
    double px = x ? 0.3 : 0.7;
    double score = (x ? 1.0 : 0.0) - q1;
    exact += qx * score * (std::log(px) - std::log(qx));
  }
  for (bool rao : {false, true}) {
    VParams params;
    VParamEntry e;
    e.fam = VarFamily::BernoulliLogit;
    e.phi = {phi};
    e.adam_m = {0};
    e.adam_v = {0};
    params.entries["x"] = e;
    int n = 4000;
    BbviEstimate est = bbvi_gradient(m, params, rao, n, 123, 7);
    double se = 3.0 * std::sqrt(est.variance["x"][0] / n) + 1e-9;
    CHECK_MESSAGE(close(est.grad["x"][0], exact, se), "rao=", rao, " got ",
                  est.grad["x"][0], " want ", exact, " se ", se);
  }
}

TEST_CASE("BBVI estimator matches the closed-form Normal-Normal ELBO gradient") {
  // z ~ N(0,1); obs ~ N(z,1) clamped to 1.4; q = N(mu, exp(ls)).
  ModelManifest mf;
  mf.name = "normal_pair";
  mf.obs_prefix = "obs";
  Model m = load_model_source(mf, "z = sample(\"z\", Normal(0.0, 1.0))\n"
                                  "y = sample(\"obs\", Normal(z, 1.0))",
                              1);
  m.observed.set("obs", Value::real(1.4));
  double mu = 0.3, ls = 0.1, x = 1.4;
  double s2 = std::exp(2 * ls);
  // ELBO = E_q[-z^2/2 - (x-z)^2/2] + entropy + const
  double dmu = -mu + (x - mu);
  double dls = 1.0 - 2.0 * s2;
  for (bool rao : {false, true}) {
    VParams params;
    VParamEntry e;
    e.fam = VarFamily::MeanFieldNormal;
    e.phi = {mu, ls};
    e.adam_m = {0, 0};
    e.adam_v = {0, 0};
    params.entries["z"] = e;
    int n = 6000;
    BbviEstimate est = bbvi_gradient(m, params, rao, n, 321, 4);
    double se0 = 3.0 * std::sqrt(est.variance["z"][0] / n) + 1e-9;
    double se1 = 3.0 * std::sqrt(est.variance["z"][1] / n) + 1e-9;
    CHECK_MESSAGE(close(est.grad["z"][0], dmu, se0), "rao=", rao, " dmu got ",
                  est.grad["z"][0], " want ", dmu);
    CHECK_MESSAGE(close(est.grad["z"][1], dls, se1), "rao=", rao, " dls got ",
                  est.grad["z"][1], " want ", dls);
  }
}

TEST_CASE("BBVI: independent factors stay out of each other's Rao weights") {
  Model m = model_from_source("indep2", "x = sample(\"x\", Normal(0.0, 1.0))\n"
                                        "y = sample(\"y\", Normal(5.0, 1.0))");
  // Rao slice for x is visit-only; its weight ignores y entirely, so the
  // estimator variance for x must be far below the standard one (which
  // carries y's wandering log terms).
  VParams p1, p2;
  BbviEstimate es = bbvi_gradient(m, p1, false, 2000, 5, 0);
  BbviEstimate er = bbvi_gradient(m, p2, true, 2000, 5, 0);
  CHECK(er.variance["x"][0] < es.variance["x"][0]);
  CHECK(er.variance["x"][1] < es.variance["x"][1]);
}

TEST_CASE("BBVI variance: Rao <= standard on the GMM-structure model, >= 10x") {
  Model m = corpus_model("fig5_program3", 1, 20);
  VParams ps, pr;
  BbviEstimate es = bbvi_gradient(m, ps, false, 1000, 42, 0);
  BbviEstimate er = bbvi_gradient(m, pr, true, 1000, 42, 0);
  CHECK(er.avg_variance <= es.avg_variance);
  CHECK(es.avg_variance / er.avg_variance >= 10.0);
}

TEST_CASE("bbvi_optimize: prior-only Normal converges to the prior mean") {
  Model m = model_from_source("prior_norm", "z = sample(\"z\", Normal(1.5, 0.5))");
  BbviOptimizeResult res = bbvi_optimize(m, true, 400, 40, 7);
  REQUIRE_FALSE(res.diverged);
  REQUIRE(res.params.entries.count("z"));
  CHECK(close(res.params.entries["z"].phi[0], 1.5, 0.1));
  // zero steps returns initial params
  BbviOptimizeResult res0 = bbvi_optimize(m, false, 0, 10, 7);
  CHECK(res0.params.entries.empty());
}

TEST_CASE("bbvi rejects models without variational families") {
  Model m = corpus_model("branching");  // Uniform prior has no family
  VParams params;
  CHECK_THROWS(bbvi_gradient(m, params, false, 4, 1, 0));
}

TEST_CASE("bbvi parallel kernel equals the serial reference bitwise") {
  Model m = corpus_model("gmm_fixed", 1, 15);
  for (bool rao : {false, true}) {
    VParams p1, p2;
    BbviEstimate a = bbvi_gradient(m, p1, rao, 64, 11, 2, 1);
    BbviEstimate b = bbvi_gradient(m, p2, rao, 64, 11, 2, 4);
    REQUIRE(a.grad.size() == b.grad.size());
    for (auto& [addr, g] : a.grad) {
      REQUIRE(b.grad.count(addr));
      CHECK(g == b.grad[addr]);
      CHECK(a.variance[addr] == b.variance[addr]);
    }
    CHECK(a.elbo == b.elbo);
  }
}

TEST_CASE("SMC: single particle telescopes to the likelihood part of log p_T") {
  Model m = corpus_model("fig5_program3", 1, 6);
  SmcResult r = smc_run(m, false, 1, 3);
  REQUIRE(r.ok);
  double total = 0.0;
  for (const SmcStep& s : r.steps) total += s.weights[0];
  // With one particle, resampling is the identity. Fresh latents are
  // proposed from their priors, so those prior terms divide out of the
  // weights; the telescoped sum is the observation part of log p_T.
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double expected = 0.0;
  for (int i = 0; i < m.data_size; ++i) {
    double z = r.traces[0].lookup("z" + std::to_string(i)).as_int();
    double mean = z == 1 ? -2.0 : 2.0;
    double x = m.observed.lookup("x" + std::to_string(i)).as_real();
    expected += -0.5 * (x - mean) * (x - mean) - 0.5 * kLog2Pi;
  }
  CHECK(close(total, expected, 1e-9));
}

TEST_CASE("SMC: normalising constant matches exact enumeration (two-step Bernoulli)") {
  ModelManifest mf;
  mf.name = "two_step";
  mf.obs_prefix = "obs_";
  mf.size_var = "n_data";
  mf.default_size = 2;
  mf.smc_compatible = true;
  std::string src = R"(
n_data = 2
z = sample("z", Bernoulli(0.5))
i = 0
while i < n_data do {
  p = z == 1 ? 0.8 : 0.3
  y = sample("obs_" + str(i), Bernoulli(p))
  i = i + 1
}
)";
  Model m = load_model_source(mf, src, 1);
  m.observed.set("obs_0", Value::integer(1));
  m.observed.set("obs_1", Value::integer(1));
  double exact = 0.5 * (0.8 * 0.8) + 0.5 * (0.3 * 0.3);
  // Average log Z over independent runs, compare within a loose CI.
  int reps = 40;
  double zsum = 0;
  for (int rr = 0; rr < reps; ++rr) {
    SmcResult r = smc_run(m, rr % 2 == 0, 200, 1000 + static_cast<uint64_t>(rr));
    REQUIRE(r.ok);
    zsum += std::exp(r.log_z);
  }
  CHECK(close(zsum / reps, exact, 0.03));
}

TEST_CASE("SMC: iterative equals naive per-step weights exactly") {
  for (const char* name :
       {"gmm_fixed", "hmm", "lda_fixed", "gmm_variable", "dirichlet_process", "urn"}) {
    Model m = corpus_model(name, 1, 12);
    SmcResult a = smc_run(m, false, 25, 17);
    SmcResult b = smc_run(m, true, 25, 17);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t t = 0; t < a.steps.size(); ++t) {
      CHECK(a.steps[t].weights == b.steps[t].weights);
      CHECK(a.steps[t].ancestors == b.steps[t].ancestors);
    }
    CHECK(a.log_z == b.log_z);
  }
}

TEST_CASE("SMC parallel kernel equals the serial reference bitwise") {
  Model m = corpus_model("hmm", 1, 12);
  for (bool iter : {false, true}) {
    SmcResult a = smc_run(m, iter, 20, 23, 1);
    SmcResult b = smc_run(m, iter, 20, 23, 4);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    for (size_t t = 0; t < a.steps.size(); ++t)
      CHECK(a.steps[t].weights == b.steps[t].weights);
    CHECK(a.log_z == b.log_z);
  }
}

TEST_CASE("SMC degenerate particle set is an error") {
  ModelManifest mf;
  mf.name = "degenerate";
  mf.obs_prefix = "obs_";
  mf.size_var = "n_data";
  mf.default_size = 1;
  mf.smc_compatible = true;
  // The observation is outside the support of its distribution.
  Model m = load_model_source(mf, "n_data = 1\ni = 0\nwhile i < n_data do {\n"
                                  "  y = sample(\"obs_\" + str(i), Bernoulli(0.5))\n"
                                  "  i = i + 1\n}",
                              1);
  m.observed.set("obs_0", Value::integer(7));
  SmcResult r = smc_run(m, false, 10, 1);
  CHECK_FALSE(r.ok);
  CHECK(r.error.find("degenerate") != std::string::npos);
}

TEST_CASE("corpus integrity: every model parses, analyzes, slices, and smokes") {
  for (const ModelManifest& mf : corpus()) {
    CAPTURE(mf.name);
    Model m = corpus_model(mf.name, 1, mf.size_var.empty() ? 0 : 10);
    CHECK(m.an.samples.size() == m.factor_slices.size());
    // 100-iteration smoke of both LMH variants.
    for (bool factored : {false, true}) {
      LmhChain chain(m, factored, 3);
      for (int i = 0; i < 100; ++i) chain.step(i);
      CHECK(density(m.prog, chain.trace()).defined);
    }
    if (mf.bbvi_compatible) {
      VParams params;
      BbviEstimate est = bbvi_gradient(m, params, true, 8, 5, 0);
      CHECK(est.n_samples == 8);
    }
    if (mf.smc_compatible) {
      SmcResult r = smc_run(m, true, 8, 5);
      CHECK(r.ok);
    }
  }
}
