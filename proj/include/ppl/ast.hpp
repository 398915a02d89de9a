#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ppl/value.hpp"

namespace ppl {

// Interned program variables. Slot 0 is the reserved density variable; it is
// not assignable from source (names may not start with '_').
class SymbolTable {
public:
  SymbolTable() { intern(kDensityName); }

  int intern(const std::string& name) {
    for (size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    names_.push_back(name);
    return static_cast<int>(names_.size() - 1);
  }
  int lookup(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return -1;
  }
  const std::string& name(int slot) const { return names_[slot]; }
  int size() const { return static_cast<int>(names_.size()); }

  static constexpr const char* kDensityName = "_p";

private:
  std::vector<std::string> names_;
};

struct Expr {
  enum class Kind { Const, Var, Call };

  Kind kind = Kind::Const;
  Value cval;               // Const
  int var_slot = -1;        // Var
  std::string var_name;     // Var (for printing)
  int builtin = -1;         // Call: index into the builtin registry
  std::string fn;           // Call: builtin name
  std::vector<Expr> args;   // Call

  static Expr constant(Value v) {
    Expr e; e.kind = Kind::Const; e.cval = std::move(v); return e;
  }
  static Expr variable(int slot, std::string name) {
    Expr e; e.kind = Kind::Var; e.var_slot = slot; e.var_name = std::move(name);
    return e;
  }
  static Expr call(int builtin, std::string fn, std::vector<Expr> args);
};

// Set of variable slots occurring in an expression (paper: vars(E)).
void free_vars(const Expr& e, std::set<int>& out);
std::set<int> free_vars(const Expr& e);

struct SampleData {
  Expr addr;               // E_0, must evaluate to a string
  int dist = -1;           // index into the distribution registry
  std::string dist_name;
  std::vector<Expr> params;
};

struct Stmt {
  enum class Kind { Skip, Assign, Seq, If, While, Sample };

  Kind kind = Kind::Skip;
  int line = 0;

  // Assign / Sample target
  int var_slot = -1;
  std::string var_name;
  Expr expr;                       // Assign rhs, If/While condition
  SampleData sample;               // Sample
  std::vector<std::unique_ptr<Stmt>> kids;  // Seq: [s1,s2]; If: [then,else]; While: [body]

  static std::unique_ptr<Stmt> skip(int line = 0);
  static std::unique_ptr<Stmt> assign(int slot, std::string name, Expr e, int line = 0);
  static std::unique_ptr<Stmt> seq(std::unique_ptr<Stmt> a, std::unique_ptr<Stmt> b);
  static std::unique_ptr<Stmt> if_(Expr cond, std::unique_ptr<Stmt> t,
                                   std::unique_ptr<Stmt> e, int line = 0);
  static std::unique_ptr<Stmt> while_(Expr cond, std::unique_ptr<Stmt> body, int line = 0);
  static std::unique_ptr<Stmt> make_sample(int slot, std::string name, SampleData s, int line = 0);

  std::unique_ptr<Stmt> clone() const;
};

bool stmt_equal(const Stmt& a, const Stmt& b);
bool expr_equal(const Expr& a, const Expr& b);

struct Program {
  std::unique_ptr<Stmt> body;
  SymbolTable syms;

  // Variables assigned anywhere in the body, plus the reserved density slot.
  std::set<int> declared_vars() const;

  Program clone() const;
};

}  // namespace ppl
