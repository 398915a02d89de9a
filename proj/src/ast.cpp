#include "ppl/ast.hpp"

#include <charconv>
#include <cstdio>

namespace ppl {

std::string format_double(double d) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  std::string s(buf, res.ptr);
  // Keep reals visually distinct from ints in printed programs.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

std::string Value::display() const {
  switch (kind()) {
    case Kind::Null: return "null";
    case Kind::Bool: return as_bool() ? "true" : "false";
    case Kind::Int: return std::to_string(as_int());
    case Kind::Real: return format_double(as_real());
    case Kind::Str: return "\"" + as_str() + "\"";
    case Kind::Vec: {
      std::string s = "[";
      const auto& v = as_vec();
      for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_double(v[i]);
      }
      return s + "]";
    }
  }
  return "null";
}

Expr Expr::call(int builtin, std::string fn, std::vector<Expr> args) {
  Expr e;
  e.kind = Kind::Call;
  e.builtin = builtin;
  e.fn = std::move(fn);
  e.args = std::move(args);
  return e;
}

void free_vars(const Expr& e, std::set<int>& out) {
  switch (e.kind) {
    case Expr::Kind::Const: return;
    case Expr::Kind::Var: out.insert(e.var_slot); return;
    case Expr::Kind::Call:
      for (const Expr& a : e.args) free_vars(a, out);
      return;
  }
}

std::set<int> free_vars(const Expr& e) {
  std::set<int> s;
  free_vars(e, s);
  return s;
}

std::unique_ptr<Stmt> Stmt::skip(int line) {
  auto s = std::make_unique<Stmt>();
  s->kind = Kind::Skip;
  s->line = line;
  return s;
}

std::unique_ptr<Stmt> Stmt::assign(int slot, std::string name, Expr e, int line) {
  auto s = std::make_unique<Stmt>();
  s->kind = Kind::Assign;
  s->var_slot = slot;
  s->var_name = std::move(name);
  s->expr = std::move(e);
  s->line = line;
  return s;
}

std::unique_ptr<Stmt> Stmt::seq(std::unique_ptr<Stmt> a, std::unique_ptr<Stmt> b) {
  auto s = std::make_unique<Stmt>();
  s->kind = Kind::Seq;
  s->line = a->line;
  s->kids.push_back(std::move(a));
  s->kids.push_back(std::move(b));
  return s;
}

std::unique_ptr<Stmt> Stmt::if_(Expr cond, std::unique_ptr<Stmt> t,
                                std::unique_ptr<Stmt> e, int line) {
  auto s = std::make_unique<Stmt>();
  s->kind = Kind::If;
  s->expr = std::move(cond);
  s->line = line;
  s->kids.push_back(std::move(t));
  s->kids.push_back(std::move(e));
  return s;
}

std::unique_ptr<Stmt> Stmt::while_(Expr cond, std::unique_ptr<Stmt> body, int line) {
  auto s = std::make_unique<Stmt>();
  s->kind = Kind::While;
  s->expr = std::move(cond);
  s->line = line;
  s->kids.push_back(std::move(body));
  return s;
}

std::unique_ptr<Stmt> Stmt::make_sample(int slot, std::string name, SampleData d, int line) {
  auto s = std::make_unique<Stmt>();
  s->kind = Kind::Sample;
  s->var_slot = slot;
  s->var_name = std::move(name);
  s->sample = std::move(d);
  s->line = line;
  return s;
}

std::unique_ptr<Stmt> Stmt::clone() const {
  auto s = std::make_unique<Stmt>();
  s->kind = kind;
  s->line = line;
  s->var_slot = var_slot;
  s->var_name = var_name;
  s->expr = expr;
  s->sample = sample;
  for (const auto& k : kids) s->kids.push_back(k->clone());
  return s;
}

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Const:
      // Type-sensitive equality: Int 1 and Real 1.0 are different constants.
      return a.cval.kind() == b.cval.kind() && a.cval.equals(b.cval);
    case Expr::Kind::Var:
      return a.var_slot == b.var_slot;
    case Expr::Kind::Call: {
      if (a.builtin != b.builtin || a.args.size() != b.args.size()) return false;
      for (size_t i = 0; i < a.args.size(); ++i)
        if (!expr_equal(a.args[i], b.args[i])) return false;
      return true;
    }
  }
  return false;
}

bool stmt_equal(const Stmt& a, const Stmt& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Stmt::Kind::Skip: return true;
    case Stmt::Kind::Assign:
      return a.var_slot == b.var_slot && expr_equal(a.expr, b.expr);
    case Stmt::Kind::Sample: {
      if (a.var_slot != b.var_slot || a.sample.dist != b.sample.dist) return false;
      if (!expr_equal(a.sample.addr, b.sample.addr)) return false;
      if (a.sample.params.size() != b.sample.params.size()) return false;
      for (size_t i = 0; i < a.sample.params.size(); ++i)
        if (!expr_equal(a.sample.params[i], b.sample.params[i])) return false;
      return true;
    }
    case Stmt::Kind::Seq:
      return stmt_equal(*a.kids[0], *b.kids[0]) && stmt_equal(*a.kids[1], *b.kids[1]);
    case Stmt::Kind::If:
      return expr_equal(a.expr, b.expr) && stmt_equal(*a.kids[0], *b.kids[0]) &&
             stmt_equal(*a.kids[1], *b.kids[1]);
    case Stmt::Kind::While:
      return expr_equal(a.expr, b.expr) && stmt_equal(*a.kids[0], *b.kids[0]);
  }
  return false;
}

namespace {
void collect_assigned(const Stmt& s, std::set<int>& out) {
  switch (s.kind) {
    case Stmt::Kind::Assign:
    case Stmt::Kind::Sample:
      out.insert(s.var_slot);
      break;
    default:
      break;
  }
  for (const auto& k : s.kids) collect_assigned(*k, out);
}
}  // namespace

std::set<int> Program::declared_vars() const {
  std::set<int> s;
  if (body) collect_assigned(*body, s);
  s.insert(0);  // reserved density variable
  return s;
}

Program Program::clone() const {
  Program p;
  p.body = body ? body->clone() : nullptr;
  p.syms = syms;
  return p;
}

}  // namespace ppl
