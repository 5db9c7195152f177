#include <doctest.h>

#include <thread>

#include "facetsim/expr.hpp"
#include "reference_expr.hpp"

using namespace facetsim;

namespace {

Value eval(const std::string& src, const VarMap& agent = {}, const VarMap& model = {}) {
  return evaluate(parse_expression(src), EvalContext{&agent, &model});
}

std::string eval_error(const std::string& src, const VarMap& agent = {}, const VarMap& model = {}) {
  try {
    eval(src, agent, model);
  } catch (const Error& e) {
    return e.code();
  }
  return "no error";
}

std::string parse_error(const std::string& src) {
  try {
    parse_expression(src);
  } catch (const Error& e) {
    return e.code();
  }
  return "no error";
}

}  // namespace

TEST_CASE("literals and unparse") {
  CHECK(eval("1") == Value(1.0));
  CHECK(eval("0.7") == Value(0.7));
  CHECK(eval("true") == Value(true));
  CHECK(eval("\"restricted\"") == Value("restricted"));
  CHECK(unparse(parse_expression("1")) == "1");
}

TEST_CASE("unparse is fully parenthesized") {
  CHECK(unparse(parse_expression("min(1, agent.income / 50000)")) == "min(1, (agent.income / 50000))");
  CHECK(unparse(parse_expression("if agent.has_job == false then 0.9 else 0.1")) ==
        "(if (agent.has_job == false) then 0.9 else 0.1)");
  CHECK(unparse(parse_expression("1 + 2 * 3")) == "(1 + (2 * 3))");
  CHECK(unparse(parse_expression("-2 * 3")) == "((-2) * 3)");
}

TEST_CASE("precedence") {
  CHECK(eval("1 + 2 * 3") == Value(7));
  CHECK(eval("(1 + 2) * 3") == Value(9));
  CHECK(eval("10 - 4 - 3") == Value(3));
  CHECK(eval("2 * 3 % 4") == Value(2));
  CHECK(eval("not 1 < 2") == Value(false));
  CHECK(eval("true or false and false") == Value(true));
  CHECK(eval("not false and false") == Value(false));
  CHECK(eval("if true then 1 else 2 + 3") == Value(1));
  CHECK(eval("--3") == Value(3));
}

TEST_CASE("comparisons do not chain") { CHECK(parse_error("1 < 2 < 3") == "SYNTAX_ERROR"); }

TEST_CASE("worked examples evaluate") {
  CHECK(eval("0.7") == Value(0.7));
  CHECK(eval("min(1, agent.income / 50000)", {{"income", 25000}}) == Value(0.5));
  VarMap agent{{"work_visa_category", "restricted"}};
  VarMap model{{"tick", 100}};
  CHECK(eval("agent.work_visa_category == \"restricted\" and model.tick < 365", agent, model) == Value(true));
}

TEST_CASE("builtins") {
  CHECK(eval("min(3, 1, 2)") == Value(1));
  CHECK(eval("max(3, 1, 2)") == Value(3));
  CHECK(eval("clamp(5, 0, 1)") == Value(1));
  CHECK(eval("clamp(-5, 0, 1)") == Value(0));
  CHECK(eval("abs(-2.5)") == Value(2.5));
  CHECK(eval("floor(2.7)") == Value(2));
  CHECK(eval("ceil(2.1)") == Value(3));
  CHECK(eval("7 % 3") == Value(1));
  CHECK(eval_error("clamp(1, 2, 0)") == "INVALID_ARGUMENT");
}

TEST_CASE("parse errors carry position") {
  CHECK(parse_error("foo(1)") == "UNKNOWN_FUNCTION");
  CHECK(parse_error("min(1)") == "ARITY_MISMATCH");
  CHECK(parse_error("abs(1, 2)") == "ARITY_MISMATCH");
  CHECK(parse_error("clamp(1, 2)") == "ARITY_MISMATCH");
  CHECK(parse_error("") == "SYNTAX_ERROR");
  CHECK(parse_error("1 +") == "SYNTAX_ERROR");
  CHECK(parse_error("(1") == "SYNTAX_ERROR");
  CHECK(parse_error("agent.") == "SYNTAX_ERROR");
  CHECK(parse_error("agent") == "SYNTAX_ERROR");
  CHECK(parse_error("other.x") == "SYNTAX_ERROR");
  CHECK(parse_error("1 2") == "SYNTAX_ERROR");
  CHECK(parse_error("\"open") == "SYNTAX_ERROR");
  CHECK(parse_error("if true then 1") == "SYNTAX_ERROR");
  try {
    parse_expression("1 +\n  * 2");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
  }
}

TEST_CASE("evaluation errors") {
  CHECK(eval_error("agent.missing") == "UNBOUND_VARIABLE");
  CHECK(eval_error("model.tick") == "UNBOUND_VARIABLE");
  CHECK(eval_error("1 and true") == "TYPE_MISMATCH");
  CHECK(eval_error("\"a\" < \"b\"") == "TYPE_MISMATCH");
  CHECK(eval_error("1 == true") == "TYPE_MISMATCH");
  CHECK(eval_error("\"a\" + 1") == "TYPE_MISMATCH");
  CHECK(eval_error("if 1 then 2 else 3") == "TYPE_MISMATCH");
  CHECK(eval_error("1 / 0") == "DIVISION_BY_ZERO");
  CHECK(eval_error("1 % 0") == "DIVISION_BY_ZERO");
  CHECK(eval_error("1e308 * 10") == "NON_FINITE");
}

TEST_CASE("short circuit and lazy branches") {
  CHECK(eval("false and 1 / 0 > 0") == Value(false));
  CHECK(eval("true or agent.nope") == Value(true));
  CHECK(eval("if true then 1 else 1 / 0") == Value(1));
}

TEST_CASE("text equality") {
  CHECK(eval("\"a\" == \"a\"") == Value(true));
  CHECK(eval("\"a\" != \"b\"") == Value(true));
  CHECK(eval("\"say \\\"hi\\\"\" == \"say \\\"hi\\\"\"") == Value(true));
}

TEST_CASE("free variables") {
  CHECK(free_variables(parse_expression("1 + 2")).empty());
  CHECK(free_variables(parse_expression("agent.a + model.b")) == std::set<std::string>{"agent.a", "model.b"});
  CHECK(free_variables(parse_expression("if agent.a > 0 then agent.a else model.c")) ==
        std::set<std::string>{"agent.a", "model.c"});
}

TEST_CASE("type checking") {
  KindMap agent{{"income", ValueKind::Number}, {"has_job", ValueKind::Boolean}, {"visa", ValueKind::Text}};
  KindMap model{{"tick", ValueKind::Number}};
  TypeEnv env{&agent, &model};
  CHECK(type_check(parse_expression("agent.income / 2"), env) == ValueKind::Number);
  CHECK(type_check(parse_expression("agent.has_job and model.tick > 3"), env) == ValueKind::Boolean);
  CHECK(type_check(parse_expression("agent.visa == \"x\""), env) == ValueKind::Boolean);
  CHECK_THROWS_WITH_AS(type_check(parse_expression("agent.incom"), env), doctest::Contains("agent.incom"), Error);
  CHECK_THROWS_AS(type_check(parse_expression("agent.visa + 1"), env), Error);
  CHECK_THROWS_AS(type_check(parse_expression("if agent.has_job then 1 else true"), env), Error);
}

TEST_CASE("round trip over a corpus") {
  for (const char* src : {"1", "-1", "agent.a * (model.b + 2) % 3", "not not true",
                          "if model.on then 1 else 2", "min(1, 2, max(3, 4))",
                          "agent.x == \"v\" or model.y != \"w\" and not (1 >= 2)",
                          "if if true then false else true then 1 else 2", "0.1 + 0.2", "1e-7 / 3"}) {
    CAPTURE(src);
    Expression e = parse_expression(src);
    CHECK(parse_expression(unparse(e)) == e);
  }
}

TEST_CASE("format_number is shortest round trip") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1e21) == "1e+21");
  for (double v : {0.1 + 0.2, 1.0 / 3.0, 12345.678, 5e-324}) CHECK(std::strtod(format_number(v).c_str(), nullptr) == v);
}

TEST_CASE("evaluation is pure and reentrant") {
  Expression e = parse_expression("min(1, agent.income / 50000) + model.tick");
  VarMap agent{{"income", 12345}};
  VarMap model{{"tick", 3}};
  Value first = evaluate(e, {&agent, &model});
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 1000; ++i) {
        if (!(evaluate(e, {&agent, &model}) == first)) ++mismatches;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(mismatches == 0);
}

TEST_CASE("random trees agree with the reference interpreter") {
  ref::Generator gen(2024);
  int disagreements = 0;
  int errors = 0;
  for (int i = 0; i < 3000; ++i) {
    ref::P tree = gen.make(i % 3 == 0 ? ref::T::Bool : ref::T::Num, 6);
    ref::Env env = gen.env();
    VarMap agent, model;
    for (const auto& [name, v] : env.vars) {
      VarMap& target = name.starts_with("agent.") ? agent : model;
      const std::string bare = name.substr(name.find('.') + 1);
      std::visit([&](const auto& x) { target[bare] = Value(x); }, v);
    }
    const std::string text = ref::render(*tree);
    std::optional<ref::Val> expected = ref::eval(*tree, env);
    std::optional<Value> actual;
    try {
      Expression parsed = parse_expression(text);
      CHECK(parse_expression(unparse(parsed)) == parsed);
      actual = evaluate(parsed, {&agent, &model});
    } catch (const Error&) {
    }
    bool agree = expected.has_value() == actual.has_value();
    if (agree && expected) {
      if (const double* d = std::get_if<double>(&*expected)) {
        agree = actual->is_number() && ref::within_one_ulp(*d, actual->as_number());
      } else if (const bool* b = std::get_if<bool>(&*expected)) {
        agree = actual->is_bool() && actual->as_bool() == *b;
      } else {
        agree = actual->is_text() && actual->as_text() == std::get<std::string>(*expected);
      }
    }
    if (!expected) ++errors;
    if (!agree) {
      ++disagreements;
      INFO(text);
      CHECK(agree);
    }
  }
  CHECK(disagreements == 0);
  CHECK(errors < 1500);  // most generated trees are well-formed
}
