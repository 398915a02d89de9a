#include "ppl/builtins.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace ppl {

namespace {

bool any_null(const std::vector<Value>& a) {
  for (const auto& v : a)
    if (v.is_null()) return true;
  return false;
}

Value num2(const std::vector<Value>& a, double (*fr)(double, double),
           int64_t (*fi)(int64_t, int64_t)) {
  if (a.size() != 2 || !a[0].is_numeric() || !a[1].is_numeric()) return Value::null();
  if (a[0].is_int() && a[1].is_int() && fi) return Value::integer(fi(a[0].as_int(), a[1].as_int()));
  return Value::real(fr(a[0].as_number(), a[1].as_number()));
}

Value b_add(const std::vector<Value>& a) {
  if (a.size() != 2) return Value::null();
  // String concatenation; an Int on the right is stringified, which is what
  // dynamic addresses like "b_"+i need.
  if (a[0].is_str()) {
    if (a[1].is_str()) return Value::str(a[0].as_str() + a[1].as_str());
    if (a[1].is_int()) return Value::str(a[0].as_str() + std::to_string(a[1].as_int()));
    return Value::null();
  }
  return num2(a, [](double x, double y) { return x + y; },
              +[](int64_t x, int64_t y) { return x + y; });
}

Value b_sub(const std::vector<Value>& a) {
  return num2(a, [](double x, double y) { return x - y; },
              +[](int64_t x, int64_t y) { return x - y; });
}

Value b_mul(const std::vector<Value>& a) {
  return num2(a, [](double x, double y) { return x * y; },
              +[](int64_t x, int64_t y) { return x * y; });
}

Value b_div(const std::vector<Value>& a) {
  if (a.size() != 2 || !a[0].is_numeric() || !a[1].is_numeric()) return Value::null();
  double d = a[1].as_number();
  if (d == 0.0) return Value::null();
  return Value::real(a[0].as_number() / d);
}

Value b_mod(const std::vector<Value>& a) {
  if (a.size() != 2 || !a[0].is_int() || !a[1].is_int() || a[1].as_int() == 0)
    return Value::null();
  return Value::integer(a[0].as_int() % a[1].as_int());
}

Value b_eq(const std::vector<Value>& a) {
  if (a.size() != 2) return Value::null();
  if (a[0].is_null() || a[1].is_null()) return Value::null();
  return Value::boolean(a[0].equals(a[1]));
}

Value b_ne(const std::vector<Value>& a) {
  Value e = b_eq(a);
  return e.is_null() ? e : Value::boolean(!e.as_bool());
}

template <typename Cmp>
Value cmp(const std::vector<Value>& a, Cmp c) {
  if (a.size() != 2 || !a[0].is_numeric() || !a[1].is_numeric()) return Value::null();
  return Value::boolean(c(a[0].as_number(), a[1].as_number()));
}

Value b_lt(const std::vector<Value>& a) { return cmp(a, [](double x, double y) { return x < y; }); }
Value b_le(const std::vector<Value>& a) { return cmp(a, [](double x, double y) { return x <= y; }); }
Value b_gt(const std::vector<Value>& a) { return cmp(a, [](double x, double y) { return x > y; }); }
Value b_ge(const std::vector<Value>& a) { return cmp(a, [](double x, double y) { return x >= y; }); }

Value b_and(const std::vector<Value>& a) {
  if (a.size() != 2 || !a[0].is_bool() || !a[1].is_bool()) return Value::null();
  return Value::boolean(a[0].as_bool() && a[1].as_bool());
}
Value b_or(const std::vector<Value>& a) {
  if (a.size() != 2 || !a[0].is_bool() || !a[1].is_bool()) return Value::null();
  return Value::boolean(a[0].as_bool() || a[1].as_bool());
}
Value b_not(const std::vector<Value>& a) {
  if (a.size() != 1 || !a[0].is_bool()) return Value::null();
  return Value::boolean(!a[0].as_bool());
}

// Strict ternary: both branches are evaluated (builtins are pure and total).
Value b_ifelse(const std::vector<Value>& a) {
  if (a.size() != 3) return Value::null();
  bool ok = false;
  bool c = a[0].truthy(&ok);
  if (!ok) return Value::null();
  return c ? a[1] : a[2];
}

Value b_str(const std::vector<Value>& a) {
  if (a.size() != 1) return Value::null();
  switch (a[0].kind()) {
    case Value::Kind::Int: return Value::str(std::to_string(a[0].as_int()));
    case Value::Kind::Str: return a[0];
    case Value::Kind::Bool: return Value::str(a[0].as_bool() ? "true" : "false");
    case Value::Kind::Real: return Value::str(format_double(a[0].as_real()));
    default: return Value::null();
  }
}

Value b_get(const std::vector<Value>& a) {
  if (a.size() != 2 || !a[0].is_vec() || !a[1].is_int()) return Value::null();
  const auto& v = a[0].as_vec();
  int64_t i = a[1].as_int();
  if (i < 0 || i >= static_cast<int64_t>(v.size())) return Value::null();
  return Value::real(v[static_cast<size_t>(i)]);
}

Value b_push(const std::vector<Value>& a) {
  if (a.size() != 2 || !a[0].is_vec() || !a[1].is_numeric()) return Value::null();
  std::vector<double> v = a[0].as_vec();
  v.push_back(a[1].as_number());
  return Value::vec(std::move(v));
}

Value b_len(const std::vector<Value>& a) {
  if (a.size() != 1 || !a[0].is_vec()) return Value::null();
  return Value::integer(static_cast<int64_t>(a[0].as_vec().size()));
}

Value b_vec(const std::vector<Value>& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) {
    if (!x.is_numeric()) return Value::null();
    v.push_back(x.as_number());
  }
  return Value::vec(std::move(v));
}

Value unary_real(const std::vector<Value>& a, double (*f)(double)) {
  if (a.size() != 1 || !a[0].is_numeric()) return Value::null();
  double r = f(a[0].as_number());
  if (!std::isfinite(r)) return Value::null();
  return Value::real(r);
}

Value b_sqrt(const std::vector<Value>& a) { return unary_real(a, [](double x) { return std::sqrt(x); }); }
Value b_log(const std::vector<Value>& a) { return unary_real(a, [](double x) { return std::log(x); }); }
Value b_exp(const std::vector<Value>& a) { return unary_real(a, [](double x) { return std::exp(x); }); }

Value b_abs(const std::vector<Value>& a) {
  if (a.size() != 1 || !a[0].is_numeric()) return Value::null();
  if (a[0].is_int()) return Value::integer(std::llabs(a[0].as_int()));
  return Value::real(std::fabs(a[0].as_real()));
}

Value b_neg(const std::vector<Value>& a) {
  if (a.size() != 1 || !a[0].is_numeric()) return Value::null();
  if (a[0].is_int()) return Value::integer(-a[0].as_int());
  return Value::real(-a[0].as_real());
}

Value b_int(const std::vector<Value>& a) {
  if (a.size() != 1 || !a[0].is_numeric()) return Value::null();
  if (a[0].is_int()) return a[0];
  return Value::integer(static_cast<int64_t>(std::floor(a[0].as_real())));
}

Value b_min(const std::vector<Value>& a) {
  return num2(a, [](double x, double y) { return x < y ? x : y; },
              +[](int64_t x, int64_t y) { return x < y ? x : y; });
}
Value b_max(const std::vector<Value>& a) {
  return num2(a, [](double x, double y) { return x > y ? x : y; },
              +[](int64_t x, int64_t y) { return x > y ? x : y; });
}

const Builtin kBuiltins[] = {
    {"+", 2, b_add},     {"-", 2, b_sub},    {"*", 2, b_mul},   {"/", 2, b_div},
    {"mod", 2, b_mod},   {"==", 2, b_eq},    {"!=", 2, b_ne},   {"<", 2, b_lt},
    {"<=", 2, b_le},     {">", 2, b_gt},     {">=", 2, b_ge},   {"and", 2, b_and},
    {"or", 2, b_or},     {"not", 1, b_not},  {"?:", 3, b_ifelse},
    {"str", 1, b_str},   {"get", 2, b_get},  {"push", 2, b_push},
    {"len", 1, b_len},   {"vec", -1, b_vec}, {"sqrt", 1, b_sqrt},
    {"log", 1, b_log},   {"exp", 1, b_exp},  {"abs", 1, b_abs},
    {"neg", 1, b_neg},   {"int", 1, b_int},  {"min", 2, b_min}, {"max", 2, b_max},
};

}  // namespace

int builtin_index(const std::string& name) {
  std::string n = name == "string" ? "str" : name;  // documented alias
  for (size_t i = 0; i < sizeof(kBuiltins) / sizeof(kBuiltins[0]); ++i)
    if (kBuiltins[i].name == n) return static_cast<int>(i);
  return -1;
}

const Builtin& builtin_at(int idx) { return kBuiltins[idx]; }

int builtin_count() { return static_cast<int>(sizeof(kBuiltins) / sizeof(kBuiltins[0])); }

Value builtin_apply(int idx, const std::vector<Value>& args) {
  const Builtin& b = kBuiltins[idx];
  if (b.arity >= 0 && static_cast<int>(args.size()) != b.arity) return Value::null();
  // Null propagation for every builtin except equality tests, which already
  // handle Null explicitly (and still return Null on it).
  if (any_null(args)) return Value::null();
  return b.fn(args);
}

bool builtin_is_infix(const std::string& name) {
  static const char* ops[] = {"+", "-", "*", "/", "==", "!=", "<", "<=", ">", ">=", "and", "or"};
  for (const char* o : ops)
    if (name == o) return true;
  return false;
}

}  // namespace ppl
