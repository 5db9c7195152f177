#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "facetsim/error.hpp"

// Expression language shared by triggers, behaviour operands, policy
// conditions, metric filters and variable initializers.
//
//   expr        := conditional
//   conditional := "if" conditional "then" conditional "else" conditional | or
//   or          := and { "or" and }
//   and         := not { "and" not }
//   not         := "not" not | compare
//   compare     := additive [ ("<" | "<=" | ">" | ">=" | "==" | "!=") additive ]
//   additive    := term { ("+" | "-") term }
//   term        := unary { ("*" | "/" | "%") unary }
//   unary       := "-" unary | primary
//   primary     := number | string | "true" | "false"
//                | ("agent" | "model") "." identifier
//                | identifier "(" [ expr { "," expr } ] ")"
//                | "(" expr ")"
//
// Evaluation is pure: no randomness, no mutation. Text values only support
// == and !=.
namespace facetsim {

enum class ValueKind { Number, Boolean, Text };

std::string_view to_string(ValueKind kind);
std::optional<ValueKind> parse_value_kind(std::string_view text);

class Value {
 public:
  Value() : data_(0.0) {}
  Value(double v) : data_(v) {}
  Value(bool v) : data_(v) {}
  Value(std::string v) : data_(std::move(v)) {}
  Value(const char* v) : data_(std::string(v)) {}
  template <typename Int>
    requires(std::is_integral_v<Int> && !std::is_same_v<Int, bool>)
  Value(Int v) : data_(static_cast<double>(v)) {}

  ValueKind kind() const { return static_cast<ValueKind>(data_.index()); }
  bool is_number() const { return kind() == ValueKind::Number; }
  bool is_bool() const { return kind() == ValueKind::Boolean; }
  bool is_text() const { return kind() == ValueKind::Text; }

  // Throw TYPE_MISMATCH on the wrong kind.
  double as_number() const;
  bool as_bool() const;
  const std::string& as_text() const;

  // Numbers in shortest round-trip form, booleans as true/false, text quoted.
  std::string to_literal() const;

  friend bool operator==(const Value&, const Value&) = default;

 private:
  std::variant<double, bool, std::string> data_;
};

using VarMap = std::map<std::string, Value, std::less<>>;
using KindMap = std::map<std::string, ValueKind, std::less<>>;

/// Shortest decimal string that parses back to exactly `v`.
std::string format_number(double v);

enum class Scope { Agent, Model };
enum class UnaryOp { Negate, Not };
enum class BinaryOp { Add, Sub, Mul, Div, Mod, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class Builtin { Min, Max, Clamp, Abs, Floor, Ceil };

std::string_view to_string(Scope scope);
std::string_view to_string(BinaryOp op);
std::string_view to_string(Builtin fn);
std::optional<Builtin> find_builtin(std::string_view name);

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Literal {
  Value value;
};
struct VarRef {
  Scope scope;
  std::string name;
};
struct Unary {
  UnaryOp op;
  NodePtr operand;
};
struct Binary {
  BinaryOp op;
  NodePtr lhs;
  NodePtr rhs;
};
struct Conditional {
  NodePtr condition;
  NodePtr then_branch;
  NodePtr else_branch;
};
struct Call {
  Builtin fn;
  std::vector<NodePtr> args;
};

struct Node {
  std::variant<Literal, VarRef, Unary, Binary, Conditional, Call> data;
};

NodePtr make_literal(Value v);
NodePtr make_ref(Scope scope, std::string name);
NodePtr make_unary(UnaryOp op, NodePtr operand);
NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs);
NodePtr make_conditional(NodePtr c, NodePtr a, NodePtr b);
// Throws ARITY_MISMATCH.
NodePtr make_call(Builtin fn, std::vector<NodePtr> args);

bool structurally_equal(const Node& a, const Node& b);

/// Immutable parsed expression. Equality is structural; the source text is
/// kept only for diagnostics and faithful re-serialization.
class Expression {
 public:
  Expression();  // literal 0
  Expression(NodePtr root, std::string source);

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }
  const std::string& source() const { return source_; }

  friend bool operator==(const Expression& a, const Expression& b) {
    return structurally_equal(*a.root_, *b.root_);
  }

 private:
  NodePtr root_;
  std::string source_;
};

/// Parse error with 1-based line/column. Codes: SYNTAX_ERROR,
/// UNKNOWN_FUNCTION, ARITY_MISMATCH.
class ParseError : public Error {
 public:
  ParseError(std::string code, const std::string& message, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

Expression parse_expression(std::string_view source);

/// Fully parenthesized rendering: reparsing it yields a structurally
/// identical tree.
std::string unparse(const Node& node);
inline std::string unparse(const Expression& e) { return unparse(e.root()); }

/// Namespaced names ("agent.x", "model.y") referenced anywhere in the tree.
std::set<std::string> free_variables(const Node& node);
inline std::set<std::string> free_variables(const Expression& e) { return free_variables(e.root()); }

struct EvalContext {
  const VarMap* agent = nullptr;
  const VarMap* model = nullptr;
};

/// Errors: UNBOUND_VARIABLE, TYPE_MISMATCH, DIVISION_BY_ZERO, NON_FINITE,
/// INVALID_ARGUMENT.
Value evaluate(const Node& node, const EvalContext& ctx);
inline Value evaluate(const Expression& e, const EvalContext& ctx) { return evaluate(e.root(), ctx); }

struct TypeEnv {
  const KindMap* agent = nullptr;
  const KindMap* model = nullptr;
};

/// Static kind of an expression. Errors: UNBOUND_VARIABLE, TYPE_MISMATCH.
ValueKind type_check(const Node& node, const TypeEnv& env);
inline ValueKind type_check(const Expression& e, const TypeEnv& env) { return type_check(e.root(), env); }

bool is_identifier(std::string_view name);

}  // namespace facetsim
