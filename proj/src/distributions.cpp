#include "ppl/distributions.hpp"

#include <cmath>
#include <limits>

namespace ppl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

bool num(const Value& v) { return v.is_numeric(); }

// ---- log pdfs ------------------------------------------------------------

double lp_normal(const Value& v, const std::vector<Value>& p) {
  if (!v.is_numeric() || !num(p[0]) || !num(p[1])) return kNegInf;
  double mu = p[0].as_number(), sd = p[1].as_number();
  if (!(sd > 0.0)) return kNegInf;
  double z = (v.as_number() - mu) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLog2Pi;
}

double lp_uniform(const Value& v, const std::vector<Value>& p) {
  if (!v.is_numeric() || !num(p[0]) || !num(p[1])) return kNegInf;
  double a = p[0].as_number(), b = p[1].as_number();
  if (!(b > a)) return kNegInf;
  double x = v.as_number();
  // Closed interval by convention; tests avoid the boundary anyway.
  if (x < a || x > b) return kNegInf;
  return -std::log(b - a);
}

double lp_bernoulli(const Value& v, const std::vector<Value>& p) {
  if (!v.is_int() || !num(p[0])) return kNegInf;
  double q = p[0].as_number();
  if (q < 0.0 || q > 1.0) return kNegInf;
  int64_t x = v.as_int();
  if (x == 1) return q > 0.0 ? std::log(q) : kNegInf;
  if (x == 0) return q < 1.0 ? std::log1p(-q) : kNegInf;
  return kNegInf;
}

double lp_poisson(const Value& v, const std::vector<Value>& p) {
  if (!v.is_int() || !num(p[0])) return kNegInf;
  double lam = p[0].as_number();
  int64_t k = v.as_int();
  if (!(lam > 0.0) || k < 0) return kNegInf;
  return k * std::log(lam) - lam - std::lgamma(static_cast<double>(k) + 1.0);
}

double lp_gamma(const Value& v, const std::vector<Value>& p) {
  if (!v.is_numeric() || !num(p[0]) || !num(p[1])) return kNegInf;
  double a = p[0].as_number(), rate = p[1].as_number(), x = v.as_number();
  if (!(a > 0.0) || !(rate > 0.0) || !(x > 0.0)) return kNegInf;
  return a * std::log(rate) - std::lgamma(a) + (a - 1.0) * std::log(x) - rate * x;
}

double lp_inverse_gamma(const Value& v, const std::vector<Value>& p) {
  if (!v.is_numeric() || !num(p[0]) || !num(p[1])) return kNegInf;
  double a = p[0].as_number(), scale = p[1].as_number(), x = v.as_number();
  if (!(a > 0.0) || !(scale > 0.0) || !(x > 0.0)) return kNegInf;
  return a * std::log(scale) - std::lgamma(a) - (a + 1.0) * std::log(x) - scale / x;
}

double lp_beta(const Value& v, const std::vector<Value>& p) {
  if (!v.is_numeric() || !num(p[0]) || !num(p[1])) return kNegInf;
  double a = p[0].as_number(), b = p[1].as_number(), x = v.as_number();
  if (!(a > 0.0) || !(b > 0.0) || !(x > 0.0) || !(x < 1.0)) return kNegInf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

double lp_exponential(const Value& v, const std::vector<Value>& p) {
  if (!v.is_numeric() || !num(p[0])) return kNegInf;
  double rate = p[0].as_number(), x = v.as_number();
  if (!(rate > 0.0) || !(x >= 0.0)) return kNegInf;
  return std::log(rate) - rate * x;
}

double lp_categorical(const Value& v, const std::vector<Value>& p) {
  if (!v.is_int() || !p[0].is_vec()) return kNegInf;
  const auto& w = p[0].as_vec();
  int64_t k = v.as_int();
  if (k < 0 || k >= static_cast<int64_t>(w.size())) return kNegInf;
  double total = 0.0;
  for (double x : w) {
    if (x < 0.0) return kNegInf;
    total += x;
  }
  if (!(total > 0.0)) return kNegInf;
  double q = w[static_cast<size_t>(k)] / total;
  return q > 0.0 ? std::log(q) : kNegInf;
}

double lp_dirichlet(const Value& v, const std::vector<Value>& p) {
  if (!v.is_vec() || !p[0].is_vec()) return kNegInf;
  const auto& a = p[0].as_vec();
  const auto& x = v.as_vec();
  if (a.size() != x.size() || a.empty()) return kNegInf;
  double sum = 0.0, lp = 0.0, asum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0) || !(x[i] > 0.0) || x[i] >= 1.0) return kNegInf;
    sum += x[i];
    asum += a[i];
    lp += (a[i] - 1.0) * std::log(x[i]) - std::lgamma(a[i]);
  }
  if (std::fabs(sum - 1.0) > 1e-8) return kNegInf;
  return lp + std::lgamma(asum);
}

double lp_discrete_uniform(const Value& v, const std::vector<Value>& p) {
  if (!v.is_int() || !p[0].is_int() || !p[1].is_int()) return kNegInf;
  int64_t lo = p[0].as_int(), hi = p[1].as_int(), x = v.as_int();
  if (hi < lo || x < lo || x > hi) return kNegInf;
  return -std::log(static_cast<double>(hi - lo + 1));
}

// ---- samplers ------------------------------------------------------------

Value s_normal(const std::vector<Value>& p, Rng& rng) {
  if (!num(p[0]) || !num(p[1]) || !(p[1].as_number() > 0.0)) return Value::null();
  return Value::real(p[0].as_number() + p[1].as_number() * rng.next_normal());
}

Value s_uniform(const std::vector<Value>& p, Rng& rng) {
  if (!num(p[0]) || !num(p[1])) return Value::null();
  double a = p[0].as_number(), b = p[1].as_number();
  if (!(b > a)) return Value::null();
  return Value::real(a + (b - a) * rng.next_double());
}

Value s_bernoulli(const std::vector<Value>& p, Rng& rng) {
  if (!num(p[0])) return Value::null();
  double q = p[0].as_number();
  if (q < 0.0 || q > 1.0) return Value::null();
  return Value::integer(rng.next_double() < q ? 1 : 0);
}

Value s_poisson(const std::vector<Value>& p, Rng& rng) {
  if (!num(p[0])) return Value::null();
  double lam = p[0].as_number();
  if (!(lam > 0.0) || lam > 1e4) return Value::null();
  // Knuth's method; desk-scale rates only.
  double limit = std::exp(-lam), prod = rng.next_double();
  int64_t k = 0;
  while (prod > limit) {
    prod *= rng.next_double();
    ++k;
  }
  return Value::integer(k);
}

Value s_exponential(const std::vector<Value>& p, Rng& rng) {
  if (!num(p[0]) || !(p[0].as_number() > 0.0)) return Value::null();
  return Value::real(-std::log(rng.next_open()) / p[0].as_number());
}

Value s_gamma(const std::vector<Value>& p, Rng& rng) {
  if (!num(p[0]) || !num(p[1])) return Value::null();
  double a = p[0].as_number(), rate = p[1].as_number();
  if (!(a > 0.0) || !(rate > 0.0)) return Value::null();
  return Value::real(sample_gamma(a, rng) / rate);
}

Value s_inverse_gamma(const std::vector<Value>& p, Rng& rng) {
  if (!num(p[0]) || !num(p[1])) return Value::null();
  double a = p[0].as_number(), scale = p[1].as_number();
  if (!(a > 0.0) || !(scale > 0.0)) return Value::null();
  return Value::real(scale / sample_gamma(a, rng));
}

Value s_beta(const std::vector<Value>& p, Rng& rng) {
  if (!num(p[0]) || !num(p[1])) return Value::null();
  double a = p[0].as_number(), b = p[1].as_number();
  if (!(a > 0.0) || !(b > 0.0)) return Value::null();
  double x = sample_gamma(a, rng), y = sample_gamma(b, rng);
  return Value::real(x / (x + y));
}

Value s_categorical(const std::vector<Value>& p, Rng& rng) {
  if (!p[0].is_vec()) return Value::null();
  const auto& w = p[0].as_vec();
  double total = 0.0;
  for (double x : w) {
    if (x < 0.0) return Value::null();
    total += x;
  }
  if (!(total > 0.0)) return Value::null();
  double u = rng.next_double() * total, acc = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return Value::integer(static_cast<int64_t>(i));
  }
  return Value::integer(static_cast<int64_t>(w.size()) - 1);
}

Value s_dirichlet(const std::vector<Value>& p, Rng& rng) {
  if (!p[0].is_vec()) return Value::null();
  const auto& a = p[0].as_vec();
  if (a.empty()) return Value::null();
  std::vector<double> g(a.size());
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0)) return Value::null();
    g[i] = sample_gamma(a[i], rng);
    sum += g[i];
  }
  for (double& x : g) x /= sum;
  return Value::vec(std::move(g));
}

Value s_discrete_uniform(const std::vector<Value>& p, Rng& rng) {
  if (!p[0].is_int() || !p[1].is_int()) return Value::null();
  int64_t lo = p[0].as_int(), hi = p[1].as_int();
  if (hi < lo) return Value::null();
  uint64_t span = static_cast<uint64_t>(hi - lo + 1);
  return Value::integer(lo + static_cast<int64_t>(rng.next_u64() % span));
}

const DistEntry kDists[] = {
    {"Normal", 2, Support::Real, VarFamily::MeanFieldNormal, lp_normal, s_normal},
    {"Uniform", 2, Support::Real, VarFamily::None, lp_uniform, s_uniform},
    {"Bernoulli", 1, Support::BoolInt, VarFamily::BernoulliLogit, lp_bernoulli, s_bernoulli},
    {"Poisson", 1, Support::Integer, VarFamily::None, lp_poisson, s_poisson},
    {"Gamma", 2, Support::PositiveReal, VarFamily::LogNormal, lp_gamma, s_gamma},
    {"InverseGamma", 2, Support::PositiveReal, VarFamily::LogNormal, lp_inverse_gamma,
     s_inverse_gamma},
    {"Beta", 2, Support::UnitInterval, VarFamily::LogitNormal, lp_beta, s_beta},
    {"Exponential", 1, Support::PositiveReal, VarFamily::LogNormal, lp_exponential,
     s_exponential},
    {"Categorical", 1, Support::Integer, VarFamily::Softmax, lp_categorical, s_categorical},
    {"Dirichlet", 1, Support::Simplex, VarFamily::DirichletExp, lp_dirichlet, s_dirichlet},
    {"DiscreteUniform", 2, Support::Integer, VarFamily::None, lp_discrete_uniform,
     s_discrete_uniform},
};

}  // namespace

double sample_gamma(double shape, Rng& rng) {
  // Marsaglia-Tsang squeeze; shape < 1 boosted via the u^(1/a) trick.
  if (shape < 1.0) {
    double u = rng.next_open();
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.next_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = rng.next_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

int dist_index(const std::string& name) {
  std::string n = name;
  if (n == "Norm") n = "Normal";
  if (n == "Bern") n = "Bernoulli";
  if (n == "InvGamma") n = "InverseGamma";
  if (n == "DiscUniform") n = "DiscreteUniform";
  for (size_t i = 0; i < sizeof(kDists) / sizeof(kDists[0]); ++i)
    if (kDists[i].name == n) return static_cast<int>(i);
  return -1;
}

const DistEntry& dist_at(int idx) { return kDists[idx]; }

int dist_count() { return static_cast<int>(sizeof(kDists) / sizeof(kDists[0])); }

double digamma(double x) {
  // Recurrence to x >= 6, then the asymptotic series.
  double r = 0.0;
  while (x < 6.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  double f = 1.0 / (x * x);
  return r + std::log(x) - 0.5 / x -
         f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f / 240.0)));
}

// ---- variational families -------------------------------------------------

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

int FamilyOps::dim(VarFamily f, const std::vector<Value>& prior_params) {
  switch (f) {
    case VarFamily::MeanFieldNormal:
    case VarFamily::LogNormal:
    case VarFamily::LogitNormal:
      return 2;
    case VarFamily::BernoulliLogit:
      return 1;
    case VarFamily::Softmax:
    case VarFamily::DirichletExp:
      return prior_params.size() == 1 && prior_params[0].is_vec()
                 ? static_cast<int>(prior_params[0].as_vec().size())
                 : 0;
    case VarFamily::None:
      return 0;
  }
  return 0;
}

std::vector<double> FamilyOps::init(VarFamily f, const std::vector<Value>& prior_params) {
  return std::vector<double>(static_cast<size_t>(dim(f, prior_params)), 0.0);
}

Value FamilyOps::sample(VarFamily f, const std::vector<double>& phi, Rng& rng) {
  switch (f) {
    case VarFamily::MeanFieldNormal:
      return Value::real(phi[0] + std::exp(phi[1]) * rng.next_normal());
    case VarFamily::BernoulliLogit:
      return Value::integer(rng.next_double() < sigmoid(phi[0]) ? 1 : 0);
    case VarFamily::LogNormal:
      return Value::real(std::exp(phi[0] + std::exp(phi[1]) * rng.next_normal()));
    case VarFamily::LogitNormal:
      return Value::real(sigmoid(phi[0] + std::exp(phi[1]) * rng.next_normal()));
    case VarFamily::Softmax: {
      double mx = phi[0];
      for (double w : phi) mx = std::max(mx, w);
      double total = 0.0;
      for (double w : phi) total += std::exp(w - mx);
      double u = rng.next_double() * total, acc = 0.0;
      for (size_t i = 0; i < phi.size(); ++i) {
        acc += std::exp(phi[i] - mx);
        if (u < acc) return Value::integer(static_cast<int64_t>(i));
      }
      return Value::integer(static_cast<int64_t>(phi.size()) - 1);
    }
    case VarFamily::DirichletExp: {
      std::vector<double> g(phi.size());
      double sum = 0.0;
      for (size_t i = 0; i < phi.size(); ++i) {
        g[i] = sample_gamma(std::exp(phi[i]), rng);
        sum += g[i];
      }
      for (double& x : g) x /= sum;
      return Value::vec(std::move(g));
    }
    case VarFamily::None:
      return Value::null();
  }
  return Value::null();
}

double FamilyOps::log_q(VarFamily f, const std::vector<double>& phi, const Value& v) {
  switch (f) {
    case VarFamily::MeanFieldNormal: {
      double sd = std::exp(phi[1]);
      double z = (v.as_number() - phi[0]) / sd;
      return -0.5 * z * z - phi[1] - 0.5 * kLog2Pi;
    }
    case VarFamily::BernoulliLogit: {
      double p = sigmoid(phi[0]);
      return v.as_int() == 1 ? std::log(p) : std::log1p(-p);
    }
    case VarFamily::LogNormal: {
      double y = std::log(v.as_number());
      double sd = std::exp(phi[1]);
      double z = (y - phi[0]) / sd;
      return -0.5 * z * z - phi[1] - 0.5 * kLog2Pi - y;
    }
    case VarFamily::LogitNormal: {
      double x = v.as_number();
      double y = std::log(x) - std::log1p(-x);
      double sd = std::exp(phi[1]);
      double z = (y - phi[0]) / sd;
      return -0.5 * z * z - phi[1] - 0.5 * kLog2Pi - std::log(x) - std::log1p(-x);
    }
    case VarFamily::Softmax: {
      double mx = phi[0];
      for (double w : phi) mx = std::max(mx, w);
      double total = 0.0;
      for (double w : phi) total += std::exp(w - mx);
      return phi[static_cast<size_t>(v.as_int())] - mx - std::log(total);
    }
    case VarFamily::DirichletExp: {
      const auto& x = v.as_vec();
      double lp = 0.0, asum = 0.0;
      for (size_t i = 0; i < phi.size(); ++i) {
        double a = std::exp(phi[i]);
        asum += a;
        lp += (a - 1.0) * std::log(x[i]) - std::lgamma(a);
      }
      return lp + std::lgamma(asum);
    }
    case VarFamily::None:
      return kNegInf;
  }
  return kNegInf;
}

std::vector<double> FamilyOps::grad_log_q(VarFamily f, const std::vector<double>& phi,
                                          const Value& v) {
  switch (f) {
    case VarFamily::MeanFieldNormal: {
      double sd = std::exp(phi[1]);
      double z = (v.as_number() - phi[0]) / sd;
      return {z / sd, z * z - 1.0};
    }
    case VarFamily::BernoulliLogit: {
      double p = sigmoid(phi[0]);
      return {static_cast<double>(v.as_int()) - p};
    }
    case VarFamily::LogNormal: {
      double y = std::log(v.as_number());
      double sd = std::exp(phi[1]);
      double z = (y - phi[0]) / sd;
      return {z / sd, z * z - 1.0};
    }
    case VarFamily::LogitNormal: {
      double x = v.as_number();
      double y = std::log(x) - std::log1p(-x);
      double sd = std::exp(phi[1]);
      double z = (y - phi[0]) / sd;
      return {z / sd, z * z - 1.0};
    }
    case VarFamily::Softmax: {
      double mx = phi[0];
      for (double w : phi) mx = std::max(mx, w);
      double total = 0.0;
      for (double w : phi) total += std::exp(w - mx);
      std::vector<double> g(phi.size());
      for (size_t i = 0; i < phi.size(); ++i)
        g[i] = (static_cast<size_t>(v.as_int()) == i ? 1.0 : 0.0) - std::exp(phi[i] - mx) / total;
      return g;
    }
    case VarFamily::DirichletExp: {
      const auto& x = v.as_vec();
      std::vector<double> a(phi.size());
      double asum = 0.0;
      for (size_t i = 0; i < phi.size(); ++i) {
        a[i] = std::exp(phi[i]);
        asum += a[i];
      }
      std::vector<double> g(phi.size());
      for (size_t i = 0; i < phi.size(); ++i)
        g[i] = a[i] * (std::log(x[i]) - digamma(a[i]) + digamma(asum));
      return g;
    }
    case VarFamily::None:
      return {};
  }
  return {};
}

}  // namespace ppl
