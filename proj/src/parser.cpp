#include "ppl/parser.hpp"

#include <cctype>
#include <cstdlib>

#include "ppl/builtins.hpp"
#include "ppl/distributions.hpp"

namespace ppl {

namespace {

enum class Tok {
  End, Newline, Ident, Int, Real, Str, LParen, RParen, LBrace, RBrace,
  LBracket, RBracket, Comma, Assign, Question, Colon, Op,
};

struct Token {
  Tok kind;
  std::string text;
  int64_t ival = 0;
  double rval = 0.0;
  int line = 1, col = 1;
};

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit Lexer(const std::string& s) : src(s) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line, col); }

  char peek() const { return pos < src.size() ? src[pos] : '\0'; }
  char peek2() const { return pos + 1 < src.size() ? src[pos + 1] : '\0'; }

  char advance() {
    char c = src[pos++];
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    return c;
  }

  Token next() {
    // Skip spaces and comments; newlines are significant separators.
    while (pos < src.size()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else if (c == '#') {
        while (pos < src.size() && peek() != '\n') advance();
      } else {
        break;
      }
    }
    Token t;
    t.line = line;
    t.col = col;
    if (pos >= src.size()) {
      t.kind = Tok::End;
      return t;
    }
    char c = advance();
    switch (c) {
      case '\n': t.kind = Tok::Newline; return t;
      case ';': t.kind = Tok::Newline; return t;
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      case '{': t.kind = Tok::LBrace; return t;
      case '}': t.kind = Tok::RBrace; return t;
      case '[': t.kind = Tok::LBracket; return t;
      case ']': t.kind = Tok::RBracket; return t;
      case ',': t.kind = Tok::Comma; return t;
      case '?': t.kind = Tok::Question; return t;
      case ':': t.kind = Tok::Colon; return t;
      case '+': case '*': case '/':
        t.kind = Tok::Op; t.text = std::string(1, c); return t;
      case '-':
        t.kind = Tok::Op; t.text = "-"; return t;
      case '=':
        if (peek() == '=') { advance(); t.kind = Tok::Op; t.text = "=="; return t; }
        t.kind = Tok::Assign;
        return t;
      case '!':
        if (peek() == '=') { advance(); t.kind = Tok::Op; t.text = "!="; return t; }
        fail("unexpected '!'");
      case '<':
        if (peek() == '=') { advance(); t.kind = Tok::Op; t.text = "<="; return t; }
        t.kind = Tok::Op; t.text = "<"; return t;
      case '>':
        if (peek() == '=') { advance(); t.kind = Tok::Op; t.text = ">="; return t; }
        t.kind = Tok::Op; t.text = ">"; return t;
      case '"': {
        std::string s;
        while (true) {
          if (pos >= src.size()) fail("unterminated string literal");
          char d = advance();
          if (d == '"') break;
          if (d == '\\') {
            if (pos >= src.size()) fail("unterminated escape");
            char e = advance();
            switch (e) {
              case 'n': s += '\n'; break;
              case 't': s += '\t'; break;
              case '"': s += '"'; break;
              case '\\': s += '\\'; break;
              default: fail("unknown escape");
            }
          } else {
            s += d;
          }
        }
        t.kind = Tok::Str;
        t.text = std::move(s);
        return t;
      }
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num(1, c);
      bool is_real = false;
      while (pos < src.size()) {
        char d = peek();
        if (std::isdigit(static_cast<unsigned char>(d))) {
          num += advance();
        } else if (d == '.' && std::isdigit(static_cast<unsigned char>(peek2()))) {
          is_real = true;
          num += advance();
        } else if ((d == 'e' || d == 'E') &&
                   (std::isdigit(static_cast<unsigned char>(peek2())) || peek2() == '-' ||
                    peek2() == '+')) {
          is_real = true;
          num += advance();
          if (peek() == '-' || peek() == '+') num += advance();
        } else {
          break;
        }
      }
      if (is_real) {
        t.kind = Tok::Real;
        t.rval = std::strtod(num.c_str(), nullptr);
      } else {
        t.kind = Tok::Int;
        t.ival = std::strtoll(num.c_str(), nullptr, 10);
      }
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id(1, c);
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
        id += advance();
      t.kind = Tok::Ident;
      t.text = std::move(id);
      return t;
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

bool is_keyword(const std::string& s) {
  static const char* kw[] = {"skip", "if", "then", "else", "while", "do", "sample",
                             "true", "false", "null", "and", "or", "not"};
  for (const char* k : kw)
    if (s == k) return true;
  return false;
}

struct Parser {
  Lexer lex;
  Token cur;
  std::vector<Token> pushback;
  Program prog;

  explicit Parser(const std::string& src) : lex(src) { cur = lex.next(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, cur.line, cur.col);
  }

  void bump() {
    if (!pushback.empty()) {
      cur = pushback.back();
      pushback.pop_back();
    } else {
      cur = lex.next();
    }
  }

  // Looks past separator newlines for the given keyword; on failure the
  // separators are restored so statement-list parsing still sees them.
  bool consume_keyword_after_newlines(const char* kw) {
    if (at_ident(kw)) {
      bump();
      return true;
    }
    if (cur.kind != Tok::Newline) return false;
    Token nl = cur;
    int skipped = 0;
    while (cur.kind == Tok::Newline) {
      bump();
      ++skipped;
    }
    if (at_ident(kw)) {
      bump();
      return true;
    }
    pushback.push_back(cur);
    cur = nl;
    (void)skipped;
    return false;
  }

  bool at_ident(const char* kw) const { return cur.kind == Tok::Ident && cur.text == kw; }

  void expect(Tok k, const char* what) {
    if (cur.kind != k) fail(std::string("expected ") + what);
    bump();
  }

  void skip_newlines() {
    while (cur.kind == Tok::Newline) bump();
  }

  int intern_var(const std::string& name) {
    if (name.empty() || name[0] == '_') fail("variable names may not start with '_'");
    return prog.syms.intern(name);
  }

  // ---- expressions ----

  Expr parse_expr() { return parse_ternary(); }

  Expr parse_ternary() {
    Expr c = parse_or();
    if (cur.kind == Tok::Question) {
      bump();
      Expr a = parse_ternary();
      expect(Tok::Colon, "':'");
      Expr b = parse_ternary();
      std::vector<Expr> args;
      args.push_back(std::move(c));
      args.push_back(std::move(a));
      args.push_back(std::move(b));
      return Expr::call(builtin_index("?:"), "?:", std::move(args));
    }
    return c;
  }

  Expr binop(const std::string& op, Expr a, Expr b) {
    std::vector<Expr> args;
    args.push_back(std::move(a));
    args.push_back(std::move(b));
    return Expr::call(builtin_index(op), op, std::move(args));
  }

  Expr parse_or() {
    Expr e = parse_and();
    while (at_ident("or")) {
      bump();
      e = binop("or", std::move(e), parse_and());
    }
    return e;
  }

  Expr parse_and() {
    Expr e = parse_not();
    while (at_ident("and")) {
      bump();
      e = binop("and", std::move(e), parse_not());
    }
    return e;
  }

  Expr parse_not() {
    if (at_ident("not")) {
      bump();
      std::vector<Expr> args;
      args.push_back(parse_not());
      return Expr::call(builtin_index("not"), "not", std::move(args));
    }
    return parse_cmp();
  }

  bool cur_is_op(std::initializer_list<const char*> ops) const {
    if (cur.kind != Tok::Op) return false;
    for (const char* o : ops)
      if (cur.text == o) return true;
    return false;
  }

  Expr parse_cmp() {
    Expr e = parse_add();
    if (cur_is_op({"==", "!=", "<", "<=", ">", ">="})) {
      std::string op = cur.text;
      bump();
      e = binop(op, std::move(e), parse_add());
    }
    return e;
  }

  Expr parse_add() {
    Expr e = parse_mul();
    while (cur_is_op({"+", "-"})) {
      std::string op = cur.text;
      bump();
      e = binop(op, std::move(e), parse_mul());
    }
    return e;
  }

  Expr parse_mul() {
    Expr e = parse_unary();
    while (cur_is_op({"*", "/"})) {
      std::string op = cur.text;
      bump();
      e = binop(op, std::move(e), parse_unary());
    }
    return e;
  }

  Expr parse_unary() {
    if (cur_is_op({"-"})) {
      bump();
      Expr e = parse_unary();
      // Fold negated numeric literals so -2.0 is a constant, keeping the
      // print/parse round trip structural.
      if (e.kind == Expr::Kind::Const && e.cval.is_int())
        return Expr::constant(Value::integer(-e.cval.as_int()));
      if (e.kind == Expr::Kind::Const && e.cval.is_real())
        return Expr::constant(Value::real(-e.cval.as_real()));
      std::vector<Expr> args;
      args.push_back(std::move(e));
      return Expr::call(builtin_index("neg"), "neg", std::move(args));
    }
    return parse_primary();
  }

  Expr parse_primary() {
    switch (cur.kind) {
      case Tok::Int: {
        Expr e = Expr::constant(Value::integer(cur.ival));
        bump();
        return e;
      }
      case Tok::Real: {
        Expr e = Expr::constant(Value::real(cur.rval));
        bump();
        return e;
      }
      case Tok::Str: {
        Expr e = Expr::constant(Value::str(cur.text));
        bump();
        return e;
      }
      case Tok::LParen: {
        bump();
        Expr e = parse_expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::LBracket: {
        bump();
        std::vector<double> xs;
        if (cur.kind != Tok::RBracket) {
          while (true) {
            bool negate = false;
            if (cur_is_op({"-"})) {
              negate = true;
              bump();
            }
            double x;
            if (cur.kind == Tok::Real) x = cur.rval;
            else if (cur.kind == Tok::Int) x = static_cast<double>(cur.ival);
            else fail("vector literals hold numeric constants");
            bump();
            xs.push_back(negate ? -x : x);
            if (cur.kind == Tok::Comma) { bump(); continue; }
            break;
          }
        }
        expect(Tok::RBracket, "']'");
        return Expr::constant(Value::vec(std::move(xs)));
      }
      case Tok::Ident: {
        std::string id = cur.text;
        if (id == "true") { bump(); return Expr::constant(Value::boolean(true)); }
        if (id == "false") { bump(); return Expr::constant(Value::boolean(false)); }
        if (id == "null") { bump(); return Expr::constant(Value::null()); }
        if (is_keyword(id)) fail("unexpected keyword '" + id + "' in expression");
        bump();
        if (cur.kind == Tok::LParen) {
          int b = builtin_index(id);
          if (b < 0) fail("unknown builtin '" + id + "'");
          bump();
          std::vector<Expr> args;
          if (cur.kind != Tok::RParen) {
            while (true) {
              args.push_back(parse_expr());
              if (cur.kind == Tok::Comma) { bump(); continue; }
              break;
            }
          }
          expect(Tok::RParen, "')'");
          const Builtin& bi = builtin_at(b);
          if (bi.arity >= 0 && static_cast<int>(args.size()) != bi.arity)
            fail("builtin '" + id + "' expects " + std::to_string(bi.arity) + " arguments");
          return Expr::call(b, builtin_at(b).name, std::move(args));
        }
        return Expr::variable(intern_var(id), id);
      }
      default:
        fail("expected expression");
    }
  }

  // ---- statements ----

  std::unique_ptr<Stmt> parse_block() {
    if (cur.kind == Tok::LBrace) {
      int line = cur.line;
      bump();
      auto s = parse_stmts(/*in_braces=*/true);
      expect(Tok::RBrace, "'}'");
      if (!s) s = Stmt::skip(line);
      return s;
    }
    return parse_stmt();
  }

  std::unique_ptr<Stmt> parse_stmt() {
    skip_newlines();
    int line = cur.line;
    if (at_ident("skip")) {
      bump();
      return Stmt::skip(line);
    }
    if (at_ident("if")) {
      bump();
      Expr cond = parse_expr();
      if (!at_ident("then")) fail("expected 'then'");
      bump();
      skip_newlines();
      auto t = parse_block();
      std::unique_ptr<Stmt> e;
      if (consume_keyword_after_newlines("else")) {
        skip_newlines();
        e = parse_block();
      } else {
        e = Stmt::skip(line);
      }
      return Stmt::if_(std::move(cond), std::move(t), std::move(e), line);
    }
    if (at_ident("while")) {
      bump();
      Expr cond = parse_expr();
      if (!at_ident("do")) fail("expected 'do'");
      bump();
      skip_newlines();
      auto body = parse_block();
      return Stmt::while_(std::move(cond), std::move(body), line);
    }
    if (cur.kind == Tok::Ident && !is_keyword(cur.text)) {
      std::string name = cur.text;
      bump();
      expect(Tok::Assign, "'='");
      if (at_ident("sample")) {
        bump();
        expect(Tok::LParen, "'('");
        SampleData sd;
        sd.addr = parse_expr();
        expect(Tok::Comma, "','");
        if (cur.kind != Tok::Ident) fail("expected distribution name");
        sd.dist_name = cur.text;
        sd.dist = dist_index(cur.text);
        if (sd.dist < 0) fail("unknown distribution '" + cur.text + "'");
        sd.dist_name = dist_at(sd.dist).name;  // canonical spelling
        bump();
        expect(Tok::LParen, "'('");
        if (cur.kind != Tok::RParen) {
          while (true) {
            sd.params.push_back(parse_expr());
            if (cur.kind == Tok::Comma) { bump(); continue; }
            break;
          }
        }
        expect(Tok::RParen, "')'");
        expect(Tok::RParen, "')'");
        const DistEntry& de = dist_at(sd.dist);
        int want = de.arity < 0 ? 1 : de.arity;
        if (static_cast<int>(sd.params.size()) != want)
          fail("distribution '" + de.name + "' expects " + std::to_string(want) +
               " arguments");
        int slot = intern_var(name);
        return Stmt::make_sample(slot, name, std::move(sd), line);
      }
      Expr rhs = parse_expr();
      int slot = intern_var(name);
      return Stmt::assign(slot, name, std::move(rhs), line);
    }
    fail("expected statement");
  }

  std::unique_ptr<Stmt> parse_stmts(bool in_braces) {
    std::vector<std::unique_ptr<Stmt>> list;
    skip_newlines();
    while (cur.kind != Tok::End && !(in_braces && cur.kind == Tok::RBrace)) {
      list.push_back(parse_stmt());
      if (cur.kind == Tok::Newline) skip_newlines();
      else break;
    }
    if (list.empty()) return nullptr;
    // Right-fold into binary Seq nodes.
    std::unique_ptr<Stmt> s = std::move(list.back());
    for (size_t i = list.size() - 1; i-- > 0;)
      s = Stmt::seq(std::move(list[i]), std::move(s));
    return s;
  }
};

// ---- printer ----

int prec_of(const std::string& fn) {
  if (fn == "?:") return 1;
  if (fn == "or") return 2;
  if (fn == "and") return 3;
  if (fn == "not") return 4;
  if (fn == "==" || fn == "!=" || fn == "<" || fn == "<=" || fn == ">" || fn == ">=") return 5;
  if (fn == "+" || fn == "-") return 6;
  if (fn == "*" || fn == "/") return 7;
  if (fn == "neg") return 8;
  return 9;
}

std::string print_expr(const Expr& e, int parent_prec) {
  std::string s;
  int prec = 9;
  switch (e.kind) {
    case Expr::Kind::Const:
      s = e.cval.display();
      break;
    case Expr::Kind::Var:
      s = e.var_name;
      break;
    case Expr::Kind::Call: {
      prec = prec_of(e.fn);
      if (e.fn == "?:") {
        s = print_expr(e.args[0], 2) + " ? " + print_expr(e.args[1], 1) + " : " +
            print_expr(e.args[2], 1);
      } else if (e.fn == "not") {
        s = "not " + print_expr(e.args[0], prec);
      } else if (e.fn == "neg") {
        s = "-" + print_expr(e.args[0], prec);
      } else if (builtin_is_infix(e.fn)) {
        s = print_expr(e.args[0], prec) + " " + e.fn + " " + print_expr(e.args[1], prec + 1);
      } else {
        s = e.fn + "(";
        for (size_t i = 0; i < e.args.size(); ++i) {
          if (i) s += ", ";
          s += print_expr(e.args[i], 0);
        }
        s += ")";
        prec = 9;
      }
      break;
    }
  }
  if (prec < parent_prec) return "(" + s + ")";
  return s;
}

void print_stmt(const Stmt& s, int indent, std::string& out);

void print_block(const Stmt& s, int indent, std::string& out) {
  out += "{\n";
  if (s.kind != Stmt::Kind::Skip || !s.kids.empty()) print_stmt(s, indent + 1, out);
  out += std::string(2 * static_cast<size_t>(indent), ' ') + "}";
}

void print_stmt(const Stmt& s, int indent, std::string& out) {
  std::string pad(2 * static_cast<size_t>(indent), ' ');
  switch (s.kind) {
    case Stmt::Kind::Skip:
      out += pad + "skip\n";
      break;
    case Stmt::Kind::Assign:
      out += pad + s.var_name + " = " + print_expr(s.expr, 0) + "\n";
      break;
    case Stmt::Kind::Sample: {
      out += pad + s.var_name + " = sample(" + print_expr(s.sample.addr, 0) + ", " +
             s.sample.dist_name + "(";
      for (size_t i = 0; i < s.sample.params.size(); ++i) {
        if (i) out += ", ";
        out += print_expr(s.sample.params[i], 0);
      }
      out += "))\n";
      break;
    }
    case Stmt::Kind::Seq:
      print_stmt(*s.kids[0], indent, out);
      print_stmt(*s.kids[1], indent, out);
      break;
    case Stmt::Kind::If: {
      out += pad + "if " + print_expr(s.expr, 0) + " then ";
      print_block(*s.kids[0], indent, out);
      if (!(s.kids[1]->kind == Stmt::Kind::Skip && s.kids[1]->kids.empty())) {
        out += " else ";
        print_block(*s.kids[1], indent, out);
      }
      out += "\n";
      break;
    }
    case Stmt::Kind::While: {
      out += pad + "while " + print_expr(s.expr, 0) + " do ";
      print_block(*s.kids[0], indent, out);
      out += "\n";
      break;
    }
  }
}

}  // namespace

Program parse(const std::string& source) {
  Parser p(source);
  auto body = p.parse_stmts(/*in_braces=*/false);
  if (p.cur.kind != Tok::End) p.fail("trailing input");
  if (!body) body = Stmt::skip(1);
  p.prog.body = std::move(body);
  return std::move(p.prog);
}

std::string pretty_print_expr(const Expr& e) { return print_expr(e, 0); }

std::string pretty_print_stmt(const Stmt& s, int indent) {
  std::string out;
  print_stmt(s, indent, out);
  return out;
}

std::string pretty_print(const Program& p) { return pretty_print_stmt(*p.body, 0); }

}  // namespace ppl
