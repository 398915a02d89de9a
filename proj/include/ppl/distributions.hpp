#pragma once

#include <string>
#include <vector>

#include "ppl/rng.hpp"
#include "ppl/value.hpp"

namespace ppl {

enum class Support { Real, PositiveReal, UnitInterval, Integer, BoolInt, Simplex };

// Mean-field variational families. Each family has closed-form log q and
// score function (no autodiff anywhere in the artifact).
enum class VarFamily {
  None,          // distribution not usable as a BBVI target
  MeanFieldNormal,  // phi = [mu, log sigma]
  BernoulliLogit,   // phi = [logit]
  LogNormal,        // phi = [mu, log sigma] on log(value)
  LogitNormal,      // phi = [mu, log sigma] on logit(value)
  Softmax,          // phi = [w_0..w_{K-1}], K from the prior's prob vector
  DirichletExp,     // phi = [log a_0..log a_{K-1}]
};

// One entry of the fixed distribution registry. log_pdf returns -inf for
// out-of-support values; Null parameters are rejected by the executor before
// the call ever happens. Samplers consume the Rng deterministically.
struct DistEntry {
  std::string name;
  int arity;  // -1: single vector parameter
  Support support;
  VarFamily family;
  double (*log_pdf)(const Value& v, const std::vector<Value>& params);
  Value (*sample)(const std::vector<Value>& params, Rng& rng);
};

int dist_index(const std::string& name);  // resolves aliases; -1 if unknown
const DistEntry& dist_at(int idx);
int dist_count();

double digamma(double x);

// Family operations used by BBVI.
struct FamilyOps {
  // Parameter vector size, given the prior's parameters at first encounter.
  static int dim(VarFamily f, const std::vector<Value>& prior_params);
  static std::vector<double> init(VarFamily f, const std::vector<Value>& prior_params);
  static Value sample(VarFamily f, const std::vector<double>& phi, Rng& rng);
  static double log_q(VarFamily f, const std::vector<double>& phi, const Value& v);
  static std::vector<double> grad_log_q(VarFamily f, const std::vector<double>& phi,
                                        const Value& v);
};

// Shared samplers (also used by the synthetic data generators).
double sample_gamma(double shape, Rng& rng);  // rate 1

}  // namespace ppl
