#include "facetsim/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <system_error>

namespace facetsim {

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Number: return "number";
    case ValueKind::Boolean: return "boolean";
    case ValueKind::Text: return "text";
  }
  return "?";
}

std::optional<ValueKind> parse_value_kind(std::string_view text) {
  if (text == "number") return ValueKind::Number;
  if (text == "boolean") return ValueKind::Boolean;
  if (text == "text") return ValueKind::Text;
  return std::nullopt;
}

double Value::as_number() const {
  if (const auto* v = std::get_if<double>(&data_)) return *v;
  throw Error("TYPE_MISMATCH", "expected number, got " + std::string(to_string(kind())));
}

bool Value::as_bool() const {
  if (const auto* v = std::get_if<bool>(&data_)) return *v;
  throw Error("TYPE_MISMATCH", "expected boolean, got " + std::string(to_string(kind())));
}

const std::string& Value::as_text() const {
  if (const auto* v = std::get_if<std::string>(&data_)) return *v;
  throw Error("TYPE_MISMATCH", "expected text, got " + std::string(to_string(kind())));
}

namespace {

std::string quote_text(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string Value::to_literal() const {
  switch (kind()) {
    case ValueKind::Number: return format_number(std::get<double>(data_));
    case ValueKind::Boolean: return std::get<bool>(data_) ? "true" : "false";
    case ValueKind::Text: return quote_text(std::get<std::string>(data_));
  }
  return {};
}

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string_view to_string(Scope scope) {
  return scope == Scope::Agent ? "agent" : "model";
}

std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
  }
  return "?";
}

std::string_view to_string(Builtin fn) {
  switch (fn) {
    case Builtin::Min: return "min";
    case Builtin::Max: return "max";
    case Builtin::Clamp: return "clamp";
    case Builtin::Abs: return "abs";
    case Builtin::Floor: return "floor";
    case Builtin::Ceil: return "ceil";
  }
  return "?";
}

std::optional<Builtin> find_builtin(std::string_view name) {
  for (Builtin fn : {Builtin::Min, Builtin::Max, Builtin::Clamp, Builtin::Abs, Builtin::Floor,
                     Builtin::Ceil}) {
    if (to_string(fn) == name) return fn;
  }
  return std::nullopt;
}

namespace {

// min/max are variadic (two or more); the rest have fixed arity.
bool arity_ok(Builtin fn, std::size_t n) {
  switch (fn) {
    case Builtin::Min:
    case Builtin::Max: return n >= 2;
    case Builtin::Clamp: return n == 3;
    default: return n == 1;
  }
}

std::string arity_text(Builtin fn) {
  switch (fn) {
    case Builtin::Min:
    case Builtin::Max: return "at least 2 arguments";
    case Builtin::Clamp: return "3 arguments";
    default: return "1 argument";
  }
}

}  // namespace

NodePtr make_literal(Value v) {
  return std::make_shared<const Node>(Node{Literal{std::move(v)}});
}

NodePtr make_ref(Scope scope, std::string name) {
  return std::make_shared<const Node>(Node{VarRef{scope, std::move(name)}});
}

NodePtr make_unary(UnaryOp op, NodePtr operand) {
  return std::make_shared<const Node>(Node{Unary{op, std::move(operand)}});
}

NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs) {
  return std::make_shared<const Node>(Node{Binary{op, std::move(lhs), std::move(rhs)}});
}

NodePtr make_conditional(NodePtr c, NodePtr a, NodePtr b) {
  return std::make_shared<const Node>(Node{Conditional{std::move(c), std::move(a), std::move(b)}});
}

NodePtr make_call(Builtin fn, std::vector<NodePtr> args) {
  if (!arity_ok(fn, args.size())) {
    throw Error("ARITY_MISMATCH", std::string(to_string(fn)) + " takes " + arity_text(fn) + ", got " +
                                      std::to_string(args.size()));
  }
  return std::make_shared<const Node>(Node{Call{fn, std::move(args)}});
}

bool structurally_equal(const Node& a, const Node& b) {
  if (a.data.index() != b.data.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const T& y = std::get<T>(b.data);
        if constexpr (std::is_same_v<T, Literal>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, VarRef>) {
          return x.scope == y.scope && x.name == y.name;
        } else if constexpr (std::is_same_v<T, Unary>) {
          return x.op == y.op && structurally_equal(*x.operand, *y.operand);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return x.op == y.op && structurally_equal(*x.lhs, *y.lhs) && structurally_equal(*x.rhs, *y.rhs);
        } else if constexpr (std::is_same_v<T, Conditional>) {
          return structurally_equal(*x.condition, *y.condition) &&
                 structurally_equal(*x.then_branch, *y.then_branch) &&
                 structurally_equal(*x.else_branch, *y.else_branch);
        } else {
          if (x.fn != y.fn || x.args.size() != y.args.size()) return false;
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (!structurally_equal(*x.args[i], *y.args[i])) return false;
          }
          return true;
        }
      },
      a.data);
}

Expression::Expression() : root_(make_literal(0.0)), source_("0") {}

Expression::Expression(NodePtr root, std::string source)
    : root_(std::move(root)), source_(std::move(source)) {}

ParseError::ParseError(std::string code, const std::string& message, int line, int column)
    : Error(std::move(code),
            message + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")",
            std::to_string(line) + ":" + std::to_string(column)),
      line_(line),
      column_(column) {}

bool is_identifier(std::string_view name) {
  if (name.empty()) return false;
  auto head = static_cast<unsigned char>(name.front());
  if (!(std::isalpha(head) || head == '_')) return false;
  return std::all_of(name.begin() + 1, name.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  });
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
  End,
  Number,
  String,
  Ident,
  Dot,
  Comma,
  LParen,
  RParen,
  Plus,
  Minus,
  Star,
  Slash,
  Percent,
  Lt,
  Le,
  Gt,
  Ge,
  EqEq,
  NotEq,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number(t);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          advance();
        }
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (c == '"') {
        lex_string(t);
      } else {
        lex_symbol(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  [[noreturn]] void fail(const std::string& msg, int line, int col) {
    throw ParseError("SYNTAX_ERROR", msg, line, col);
  }

  void lex_number(Token& t) {
    std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save_pos = pos_;
      int save_col = col_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        digits();
      } else {
        pos_ = save_pos;
        col_ = save_col;
        fail("malformed exponent in number literal", t.line, t.column);
      }
    }
    std::string_view text = src_.substr(start, pos_ - start);
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
      fail("invalid number literal '" + std::string(text) + "'", t.line, t.column);
    }
    if (pos_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      fail("unexpected character after number literal", line_, col_);
    }
    t.kind = Tok::Number;
    t.number = value;
    t.text = std::string(text);
  }

  void lex_string(Token& t) {
    advance();  // opening quote
    std::string value;
    for (;;) {
      if (pos_ >= src_.size()) fail("unterminated string literal", t.line, t.column);
      char c = src_[pos_];
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (pos_ >= src_.size()) fail("unterminated string literal", t.line, t.column);
        char e = src_[pos_];
        if (e != '"' && e != '\\') fail(std::string("unknown escape '\\") + e + "'", line_, col_);
        value += e;
        advance();
        continue;
      }
      value += c;
      advance();
    }
    t.kind = Tok::String;
    t.text = std::move(value);
  }

  void lex_symbol(Token& t) {
    char c = src_[pos_];
    char next = pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0';
    auto one = [&](Tok k) {
      t.kind = k;
      t.text = std::string(1, c);
      advance();
    };
    auto two = [&](Tok k) {
      t.kind = k;
      t.text = std::string{c, next};
      advance();
      advance();
    };
    switch (c) {
      case '.': return one(Tok::Dot);
      case ',': return one(Tok::Comma);
      case '(': return one(Tok::LParen);
      case ')': return one(Tok::RParen);
      case '+': return one(Tok::Plus);
      case '-': return one(Tok::Minus);
      case '*': return one(Tok::Star);
      case '/': return one(Tok::Slash);
      case '%': return one(Tok::Percent);
      case '<': return next == '=' ? two(Tok::Le) : one(Tok::Lt);
      case '>': return next == '=' ? two(Tok::Ge) : one(Tok::Gt);
      case '=':
        if (next == '=') return two(Tok::EqEq);
        fail("'=' is not an operator; use '==' for comparison", t.line, t.column);
      case '!':
        if (next == '=') return two(Tok::NotEq);
        fail("'!' is not an operator; use 'not'", t.line, t.column);
      default: break;
    }
    fail(std::string("unexpected character '") + c + "'", t.line, t.column);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

bool is_keyword(std::string_view s) {
  return s == "and" || s == "or" || s == "not" || s == "if" || s == "then" || s == "else" ||
         s == "true" || s == "false" || s == "agent" || s == "model";
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  NodePtr parse_all() {
    NodePtr e = conditional();
    if (peek().kind != Tok::End) fail_at(peek(), "unexpected " + describe(peek()));
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  bool at_word(std::string_view w) const { return peek().kind == Tok::Ident && peek().text == w; }

  static std::string describe(const Token& t) {
    if (t.kind == Tok::End) return "end of expression";
    return "'" + t.text + "'";
  }

  [[noreturn]] static void fail_at(const Token& t, const std::string& msg) {
    throw ParseError("SYNTAX_ERROR", msg, t.line, t.column);
  }

  void expect_word(std::string_view w) {
    if (!at_word(w)) fail_at(peek(), "expected '" + std::string(w) + "', found " + describe(peek()));
    take();
  }

  void expect(Tok k, std::string_view what) {
    if (peek().kind != k) fail_at(peek(), "expected " + std::string(what) + ", found " + describe(peek()));
    take();
  }

  NodePtr conditional() {
    if (at_word("if")) {
      take();
      NodePtr c = conditional();
      expect_word("then");
      NodePtr a = conditional();
      expect_word("else");
      NodePtr b = conditional();
      return make_conditional(std::move(c), std::move(a), std::move(b));
    }
    return logical_or();
  }

  NodePtr logical_or() {
    NodePtr lhs = logical_and();
    while (at_word("or")) {
      take();
      lhs = make_binary(BinaryOp::Or, lhs, logical_and());
    }
    return lhs;
  }

  NodePtr logical_and() {
    NodePtr lhs = logical_not();
    while (at_word("and")) {
      take();
      lhs = make_binary(BinaryOp::And, lhs, logical_not());
    }
    return lhs;
  }

  NodePtr logical_not() {
    if (at_word("not")) {
      take();
      return make_unary(UnaryOp::Not, logical_not());
    }
    return comparison();
  }

  static std::optional<BinaryOp> compare_op(Tok k) {
    switch (k) {
      case Tok::Lt: return BinaryOp::Lt;
      case Tok::Le: return BinaryOp::Le;
      case Tok::Gt: return BinaryOp::Gt;
      case Tok::Ge: return BinaryOp::Ge;
      case Tok::EqEq: return BinaryOp::Eq;
      case Tok::NotEq: return BinaryOp::Ne;
      default: return std::nullopt;
    }
  }

  NodePtr comparison() {
    NodePtr lhs = additive();
    if (auto op = compare_op(peek().kind)) {
      take();
      NodePtr rhs = additive();
      if (compare_op(peek().kind)) {
        fail_at(peek(), "comparisons cannot be chained; combine them with 'and'");
      }
      return make_binary(*op, lhs, rhs);
    }
    return lhs;
  }

  NodePtr additive() {
    NodePtr lhs = term();
    for (;;) {
      if (peek().kind == Tok::Plus) {
        take();
        lhs = make_binary(BinaryOp::Add, lhs, term());
      } else if (peek().kind == Tok::Minus) {
        take();
        lhs = make_binary(BinaryOp::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      BinaryOp op;
      switch (peek().kind) {
        case Tok::Star: op = BinaryOp::Mul; break;
        case Tok::Slash: op = BinaryOp::Div; break;
        case Tok::Percent: op = BinaryOp::Mod; break;
        default: return lhs;
      }
      take();
      lhs = make_binary(op, lhs, unary());
    }
  }

  NodePtr unary() {
    if (peek().kind == Tok::Minus) {
      take();
      return make_unary(UnaryOp::Negate, unary());
    }
    return primary();
  }

  NodePtr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: {
        double v = take().number;
        return make_literal(v);
      }
      case Tok::String: return make_literal(take().text);
      case Tok::LParen: {
        take();
        NodePtr e = conditional();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: return identifier_expr();
      default: fail_at(t, "expected an operand, found " + describe(t));
    }
  }

  NodePtr identifier_expr() {
    Token name = take();
    if (name.text == "true") return make_literal(true);
    if (name.text == "false") return make_literal(false);
    if (name.text == "agent" || name.text == "model") {
      if (peek().kind != Tok::Dot) {
        fail_at(peek(), "expected '.' after '" + name.text + "'");
      }
      take();
      const Token& var = peek();
      if (var.kind != Tok::Ident || is_keyword(var.text)) {
        fail_at(var, "expected a variable name after '" + name.text + ".', found " + describe(var));
      }
      std::string var_name = take().text;
      return make_ref(name.text == "agent" ? Scope::Agent : Scope::Model, std::move(var_name));
    }
    if (is_keyword(name.text)) fail_at(name, "unexpected keyword '" + name.text + "'");
    if (peek().kind != Tok::LParen) {
      fail_at(name, "bare name '" + name.text + "'; variables need an 'agent.' or 'model.' prefix");
    }
    auto fn = find_builtin(name.text);
    if (!fn) {
      throw ParseError("UNKNOWN_FUNCTION", "unknown function '" + name.text + "'", name.line, name.column);
    }
    take();  // (
    std::vector<NodePtr> args;
    if (peek().kind != Tok::RParen) {
      args.push_back(conditional());
      while (peek().kind == Tok::Comma) {
        take();
        args.push_back(conditional());
      }
    }
    expect(Tok::RParen, "')' or ','");
    if (!arity_ok(*fn, args.size())) {
      throw ParseError("ARITY_MISMATCH",
                       name.text + " takes " + arity_text(*fn) + ", got " + std::to_string(args.size()),
                       name.line, name.column);
    }
    return make_call(*fn, std::move(args));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse_expression(std::string_view source) {
  if (std::all_of(source.begin(), source.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    throw ParseError("SYNTAX_ERROR", "empty expression", 1, 1);
  }
  Parser parser(Lexer(source).run());
  return Expression(parser.parse_all(), std::string(source));
}

// ---------------------------------------------------------------------------
// Unparse / free variables

std::string unparse(const Node& node) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return x.value.to_literal();
        } else if constexpr (std::is_same_v<T, VarRef>) {
          return std::string(to_string(x.scope)) + "." + x.name;
        } else if constexpr (std::is_same_v<T, Unary>) {
          return x.op == UnaryOp::Negate ? "(-" + unparse(*x.operand) + ")"
                                         : "(not " + unparse(*x.operand) + ")";
        } else if constexpr (std::is_same_v<T, Binary>) {
          return "(" + unparse(*x.lhs) + " " + std::string(to_string(x.op)) + " " + unparse(*x.rhs) + ")";
        } else if constexpr (std::is_same_v<T, Conditional>) {
          return "(if " + unparse(*x.condition) + " then " + unparse(*x.then_branch) + " else " +
                 unparse(*x.else_branch) + ")";
        } else {
          std::string out = std::string(to_string(x.fn)) + "(";
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (i) out += ", ";
            out += unparse(*x.args[i]);
          }
          return out + ")";
        }
      },
      node.data);
}

namespace {

void collect_refs(const Node& node, std::set<std::string>& out) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, VarRef>) {
          out.insert(std::string(to_string(x.scope)) + "." + x.name);
        } else if constexpr (std::is_same_v<T, Unary>) {
          collect_refs(*x.operand, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect_refs(*x.lhs, out);
          collect_refs(*x.rhs, out);
        } else if constexpr (std::is_same_v<T, Conditional>) {
          collect_refs(*x.condition, out);
          collect_refs(*x.then_branch, out);
          collect_refs(*x.else_branch, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : x.args) collect_refs(*a, out);
        }
      },
      node.data);
}

}  // namespace

std::set<std::string> free_variables(const Node& node) {
  std::set<std::string> out;
  collect_refs(node, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

[[noreturn]] void type_error(const std::string& msg) { throw Error("TYPE_MISMATCH", msg); }

double finite(double v, std::string_view what) {
  if (!std::isfinite(v)) throw Error("NON_FINITE", "non-finite result from " + std::string(what));
  return v;
}

double number_operand(const Value& v, std::string_view op) {
  if (!v.is_number()) {
    type_error("operator '" + std::string(op) + "' needs numbers, got " + std::string(to_string(v.kind())));
  }
  return v.as_number();
}

bool bool_operand(const Value& v, std::string_view op) {
  if (!v.is_bool()) {
    type_error("operator '" + std::string(op) + "' needs booleans, got " + std::string(to_string(v.kind())));
  }
  return v.as_bool();
}

const Value& lookup(const VarRef& ref, const EvalContext& ctx) {
  const VarMap* vars = ref.scope == Scope::Agent ? ctx.agent : ctx.model;
  if (vars) {
    if (auto it = vars->find(ref.name); it != vars->end()) return it->second;
  }
  throw Error("UNBOUND_VARIABLE", "unbound variable " + std::string(to_string(ref.scope)) + "." + ref.name);
}

Value eval_binary(const Binary& b, const EvalContext& ctx) {
  const std::string_view op = to_string(b.op);
  if (b.op == BinaryOp::And || b.op == BinaryOp::Or) {
    bool lhs = bool_operand(evaluate(*b.lhs, ctx), op);
    if (b.op == BinaryOp::And && !lhs) return false;
    if (b.op == BinaryOp::Or && lhs) return true;
    return bool_operand(evaluate(*b.rhs, ctx), op);
  }
  Value lhs = evaluate(*b.lhs, ctx);
  Value rhs = evaluate(*b.rhs, ctx);
  if (b.op == BinaryOp::Eq || b.op == BinaryOp::Ne) {
    if (lhs.kind() != rhs.kind()) {
      type_error("cannot compare " + std::string(to_string(lhs.kind())) + " with " +
                 std::string(to_string(rhs.kind())));
    }
    bool eq = lhs == rhs;
    return b.op == BinaryOp::Eq ? eq : !eq;
  }
  double x = number_operand(lhs, op);
  double y = number_operand(rhs, op);
  switch (b.op) {
    case BinaryOp::Add: return finite(x + y, op);
    case BinaryOp::Sub: return finite(x - y, op);
    case BinaryOp::Mul: return finite(x * y, op);
    case BinaryOp::Div:
      if (y == 0.0) throw Error("DIVISION_BY_ZERO", "division by zero");
      return finite(x / y, op);
    case BinaryOp::Mod:
      if (y == 0.0) throw Error("DIVISION_BY_ZERO", "modulo by zero");
      return finite(std::fmod(x, y), op);
    case BinaryOp::Lt: return x < y;
    case BinaryOp::Le: return x <= y;
    case BinaryOp::Gt: return x > y;
    case BinaryOp::Ge: return x >= y;
    default: break;
  }
  type_error("unsupported operator");
}

Value eval_call(const Call& c, const EvalContext& ctx) {
  std::vector<double> args;
  args.reserve(c.args.size());
  for (const auto& a : c.args) args.push_back(number_operand(evaluate(*a, ctx), to_string(c.fn)));
  switch (c.fn) {
    case Builtin::Min: return *std::min_element(args.begin(), args.end());
    case Builtin::Max: return *std::max_element(args.begin(), args.end());
    case Builtin::Clamp:
      if (args[1] > args[2]) throw Error("INVALID_ARGUMENT", "clamp: lower bound exceeds upper bound");
      return std::min(std::max(args[0], args[1]), args[2]);
    case Builtin::Abs: return std::fabs(args[0]);
    case Builtin::Floor: return std::floor(args[0]);
    case Builtin::Ceil: return std::ceil(args[0]);
  }
  type_error("unknown function");
}

}  // namespace

Value evaluate(const Node& node, const EvalContext& ctx) {
  return std::visit(
      [&](const auto& x) -> Value {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return x.value;
        } else if constexpr (std::is_same_v<T, VarRef>) {
          return lookup(x, ctx);
        } else if constexpr (std::is_same_v<T, Unary>) {
          Value v = evaluate(*x.operand, ctx);
          if (x.op == UnaryOp::Not) return !bool_operand(v, "not");
          return -number_operand(v, "-");
        } else if constexpr (std::is_same_v<T, Binary>) {
          return eval_binary(x, ctx);
        } else if constexpr (std::is_same_v<T, Conditional>) {
          Value c = evaluate(*x.condition, ctx);
          if (!c.is_bool()) type_error("if-condition must be boolean, got " + std::string(to_string(c.kind())));
          return evaluate(c.as_bool() ? *x.then_branch : *x.else_branch, ctx);
        } else {
          return eval_call(x, ctx);
        }
      },
      node.data);
}

// ---------------------------------------------------------------------------
// Static typing

namespace {

void expect_kind(ValueKind got, ValueKind want, std::string_view what) {
  if (got != want) {
    type_error(std::string(what) + " needs " + std::string(to_string(want)) + ", got " +
               std::string(to_string(got)));
  }
}

}  // namespace

ValueKind type_check(const Node& node, const TypeEnv& env) {
  return std::visit(
      [&](const auto& x) -> ValueKind {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return x.value.kind();
        } else if constexpr (std::is_same_v<T, VarRef>) {
          const KindMap* kinds = x.scope == Scope::Agent ? env.agent : env.model;
          if (kinds) {
            if (auto it = kinds->find(x.name); it != kinds->end()) return it->second;
          }
          throw Error("UNBOUND_VARIABLE",
                      "unknown variable " + std::string(to_string(x.scope)) + "." + x.name);
        } else if constexpr (std::is_same_v<T, Unary>) {
          ValueKind k = type_check(*x.operand, env);
          if (x.op == UnaryOp::Not) {
            expect_kind(k, ValueKind::Boolean, "'not'");
            return ValueKind::Boolean;
          }
          expect_kind(k, ValueKind::Number, "unary '-'");
          return ValueKind::Number;
        } else if constexpr (std::is_same_v<T, Binary>) {
          ValueKind l = type_check(*x.lhs, env);
          ValueKind r = type_check(*x.rhs, env);
          const std::string what = "operator '" + std::string(to_string(x.op)) + "'";
          switch (x.op) {
            case BinaryOp::And:
            case BinaryOp::Or:
              expect_kind(l, ValueKind::Boolean, what);
              expect_kind(r, ValueKind::Boolean, what);
              return ValueKind::Boolean;
            case BinaryOp::Eq:
            case BinaryOp::Ne:
              if (l != r) {
                type_error("cannot compare " + std::string(to_string(l)) + " with " + std::string(to_string(r)));
              }
              return ValueKind::Boolean;
            case BinaryOp::Lt:
            case BinaryOp::Le:
            case BinaryOp::Gt:
            case BinaryOp::Ge:
              expect_kind(l, ValueKind::Number, what);
              expect_kind(r, ValueKind::Number, what);
              return ValueKind::Boolean;
            default:
              expect_kind(l, ValueKind::Number, what);
              expect_kind(r, ValueKind::Number, what);
              return ValueKind::Number;
          }
        } else if constexpr (std::is_same_v<T, Conditional>) {
          expect_kind(type_check(*x.condition, env), ValueKind::Boolean, "if-condition");
          ValueKind a = type_check(*x.then_branch, env);
          ValueKind b = type_check(*x.else_branch, env);
          if (a != b) {
            type_error("if-branches disagree: " + std::string(to_string(a)) + " vs " + std::string(to_string(b)));
          }
          return a;
        } else {
          for (const auto& arg : x.args) {
            expect_kind(type_check(*arg, env), ValueKind::Number, std::string(to_string(x.fn)) + "()");
          }
          return ValueKind::Number;
        }
      },
      node.data);
}

}  // namespace facetsim
