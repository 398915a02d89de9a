#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace ppl {

// Runtime values: null, bool, int, real, finite string, immutable real vector.
// Values are immutable; strings and vectors are shared so copies are cheap.
class Value {
public:
  enum class Kind { Null, Bool, Int, Real, Str, Vec };

  using StrPtr = std::shared_ptr<const std::string>;
  using VecPtr = std::shared_ptr<const std::vector<double>>;

  Value() : v_(std::monostate{}) {}
  static Value null() { return Value(); }
  static Value boolean(bool b) { Value v; v.v_ = b; return v; }
  static Value integer(int64_t i) { Value v; v.v_ = i; return v; }
  static Value real(double d) { Value v; v.v_ = d; return v; }
  static Value str(std::string s) {
    Value v;
    v.v_ = std::make_shared<const std::string>(std::move(s));
    return v;
  }
  static Value str(StrPtr s) { Value v; v.v_ = std::move(s); return v; }
  static Value vec(std::vector<double> xs) {
    Value v;
    v.v_ = std::make_shared<const std::vector<double>>(std::move(xs));
    return v;
  }
  static Value vec(VecPtr p) { Value v; v.v_ = std::move(p); return v; }

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  bool is_null() const { return kind() == Kind::Null; }
  bool is_bool() const { return kind() == Kind::Bool; }
  bool is_int() const { return kind() == Kind::Int; }
  bool is_real() const { return kind() == Kind::Real; }
  bool is_str() const { return kind() == Kind::Str; }
  bool is_vec() const { return kind() == Kind::Vec; }
  bool is_numeric() const { return is_int() || is_real(); }

  bool as_bool() const { return std::get<bool>(v_); }
  int64_t as_int() const { return std::get<int64_t>(v_); }
  double as_real() const { return std::get<double>(v_); }
  const std::string& as_str() const { return *std::get<StrPtr>(v_); }
  const std::vector<double>& as_vec() const { return *std::get<VecPtr>(v_); }

  // Numeric value with Int promoted to Real. Only valid for numeric kinds.
  double as_number() const { return is_int() ? static_cast<double>(as_int()) : as_real(); }

  // Structural equality. Int and Real compare after promotion; everything
  // else compares equal only within the same kind. Null == Null.
  bool equals(const Value& o) const {
    if (is_numeric() && o.is_numeric()) {
      if (is_int() && o.is_int()) return as_int() == o.as_int();
      return as_number() == o.as_number();
    }
    if (kind() != o.kind()) return false;
    switch (kind()) {
      case Kind::Null: return true;
      case Kind::Bool: return as_bool() == o.as_bool();
      case Kind::Str: return as_str() == o.as_str();
      case Kind::Vec: return as_vec() == o.as_vec();
      default: return false;
    }
  }

  // Truth value for branch conditions: Bool as-is, Int truthy iff nonzero.
  // Everything else has no truth value (execution becomes undefined).
  bool truthy(bool* ok) const {
    if (is_bool()) { *ok = true; return as_bool(); }
    if (is_int()) { *ok = true; return as_int() != 0; }
    *ok = false;
    return false;
  }

  std::string display() const;

private:
  std::variant<std::monostate, bool, int64_t, double, StrPtr, VecPtr> v_;
};

// Shortest round-trippable decimal form of a double (used by display and
// by the machine-readable reports so runs stay byte-stable).
std::string format_double(double d);

}  // namespace ppl
