#pragma once

#include <stdexcept>
#include <string>

#include "ppl/ast.hpp"

namespace ppl {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(const std::string& msg, int line_, int col_)
      : std::runtime_error(msg + " at " + std::to_string(line_) + ":" + std::to_string(col_)),
        line(line_),
        col(col_) {}
};

// Parses a `.ppl` program. Statements are separated by newlines or ';',
// blocks are braced or a single statement. Throws ParseError on bad syntax
// and on unknown builtin or distribution names.
Program parse(const std::string& source);

// Canonical concrete syntax; parse(pretty_print(p)) is structurally equal to p.
std::string pretty_print(const Program& p);
std::string pretty_print_stmt(const Stmt& s, int indent = 0);
std::string pretty_print_expr(const Expr& e);

}  // namespace ppl
