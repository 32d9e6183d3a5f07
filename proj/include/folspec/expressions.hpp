#pragma once

// Parser/evaluator for the closed-form coefficient expressions accepted in
// experiment configs.  The fibered-model grammar is deliberately small:
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | primary
//   primary := number | 'x' | 'y' | 'pi' | 'sin(expr)' | 'cos(expr)'
//            | 'exp(expr)' | '(expr)'
// Numbers use the usual decimal/scientific forms.  'π' is accepted as a
// synonym for 'pi'.  Flat-model span entries reuse the same parser in a
// constant-only mode: variables are rejected and 'sqrt' becomes available,
// so slopes like "sqrt(2)" stay exact to the last bit of the double.

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "folspec/errors.hpp"

namespace folspec {

struct ExpressionError : ConfigError {
  using ConfigError::ConfigError;
};

class Expression {
 public:
  // Grammar features are chosen by the caller, not guessed from the input.
  struct Options {
    bool allow_variables = true;
    bool allow_sqrt = false;
  };

  static Expression parse(const std::string& text) { return parse(text, Options{}); }

  static Expression parse(const std::string& text, Options opts) {
    Parser parser(text, opts);
    Expression e;
    e.root_ = parser.parse_expression();
    parser.expect_end();
    e.uses_x_ = parser.uses_x;
    e.uses_y_ = parser.uses_y;
    e.text_ = text;
    return e;
  }

  double operator()(double x, double y) const { return eval(*root_, x, y); }
  double constant_value() const { return eval(*root_, 0.0, 0.0); }

  bool uses_x() const { return uses_x_; }
  bool uses_y() const { return uses_y_; }
  const std::string& text() const { return text_; }

 private:
  enum class Op { Number, VarX, VarY, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp, Sqrt };

  struct Node {
    Op op;
    double value = 0.0;
    std::unique_ptr<Node> lhs;
    std::unique_ptr<Node> rhs;
  };

  static double eval(const Node& n, double x, double y) {
    switch (n.op) {
      case Op::Number: return n.value;
      case Op::VarX: return x;
      case Op::VarY: return y;
      case Op::Add: return eval(*n.lhs, x, y) + eval(*n.rhs, x, y);
      case Op::Sub: return eval(*n.lhs, x, y) - eval(*n.rhs, x, y);
      case Op::Mul: return eval(*n.lhs, x, y) * eval(*n.rhs, x, y);
      case Op::Div: return eval(*n.lhs, x, y) / eval(*n.rhs, x, y);
      case Op::Neg: return -eval(*n.lhs, x, y);
      case Op::Sin: return std::sin(eval(*n.lhs, x, y));
      case Op::Cos: return std::cos(eval(*n.lhs, x, y));
      case Op::Exp: return std::exp(eval(*n.lhs, x, y));
      case Op::Sqrt: return std::sqrt(eval(*n.lhs, x, y));
    }
    return 0.0;
  }

  struct Parser {
    const std::string& text;
    Options opts;
    std::size_t pos = 0;
    bool uses_x = false;
    bool uses_y = false;

    Parser(const std::string& t, Options o) : text(t), opts(o) {}

    [[noreturn]] void fail(const std::string& what) const {
      throw ExpressionError("expression \"" + text + "\": " + what + " at position " +
                            std::to_string(pos));
    }

    void skip_ws() {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool consume(char c) {
      skip_ws();
      if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    std::unique_ptr<Node> parse_expression() {
      auto lhs = parse_term();
      for (;;) {
        if (consume('+')) {
          lhs = binary(Op::Add, std::move(lhs), parse_term());
        } else if (consume('-')) {
          lhs = binary(Op::Sub, std::move(lhs), parse_term());
        } else {
          return lhs;
        }
      }
    }

    std::unique_ptr<Node> parse_term() {
      auto lhs = parse_unary();
      for (;;) {
        if (consume('*')) {
          lhs = binary(Op::Mul, std::move(lhs), parse_unary());
        } else if (consume('/')) {
          lhs = binary(Op::Div, std::move(lhs), parse_unary());
        } else {
          return lhs;
        }
      }
    }

    std::unique_ptr<Node> parse_unary() {
      if (consume('-')) {
        auto n = std::make_unique<Node>();
        n->op = Op::Neg;
        n->lhs = parse_unary();
        return n;
      }
      return parse_primary();
    }

    std::unique_ptr<Node> parse_primary() {
      skip_ws();
      if (pos >= text.size()) fail("unexpected end of input");
      char c = text[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
      if (c == '(') {
        ++pos;
        auto inner = parse_expression();
        if (!consume(')')) fail("missing ')'");
        return inner;
      }
      // UTF-8 for the Greek letter pi
      if (text.compare(pos, 2, "\xcf\x80") == 0) {
        pos += 2;
        return number(std::numbers::pi);
      }
      if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
      fail(std::string("unexpected character '") + c + "'");
    }

    std::unique_ptr<Node> parse_number() {
      std::size_t start = pos;
      while (pos < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.'))
        ++pos;
      if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
        std::size_t mark = pos;
        ++pos;
        if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
        if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
          while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        } else {
          pos = mark;  // 'e' belonged to something else; not a valid exponent
        }
      }
      try {
        std::size_t used = 0;
        double v = std::stod(text.substr(start, pos - start), &used);
        if (used != pos - start) fail("malformed number");
        return number(v);
      } catch (const std::exception&) {
        pos = start;
        fail("malformed number");
      }
    }

    std::unique_ptr<Node> parse_identifier() {
      std::size_t start = pos;
      while (pos < text.size() && std::isalpha(static_cast<unsigned char>(text[pos]))) ++pos;
      std::string name = text.substr(start, pos - start);
      if (name == "x" || name == "y") {
        if (!opts.allow_variables) {
          pos = start;
          fail("variable '" + name + "' not allowed in a constant expression");
        }
        (name == "x" ? uses_x : uses_y) = true;
        auto n = std::make_unique<Node>();
        n->op = (name == "x") ? Op::VarX : Op::VarY;
        return n;
      }
      if (name == "pi") return number(std::numbers::pi);
      Op fn;
      if (name == "sin") {
        fn = Op::Sin;
      } else if (name == "cos") {
        fn = Op::Cos;
      } else if (name == "exp") {
        fn = Op::Exp;
      } else if (name == "sqrt" && opts.allow_sqrt) {
        fn = Op::Sqrt;
      } else {
        pos = start;
        fail("unknown identifier '" + name + "'");
      }
      if (!consume('(')) fail("expected '(' after '" + name + "'");
      auto arg = parse_expression();
      if (!consume(')')) fail("missing ')'");
      auto n = std::make_unique<Node>();
      n->op = fn;
      n->lhs = std::move(arg);
      return n;
    }

    void expect_end() {
      skip_ws();
      if (pos != text.size()) fail("trailing input");
    }

    static std::unique_ptr<Node> number(double v) {
      auto n = std::make_unique<Node>();
      n->op = Op::Number;
      n->value = v;
      return n;
    }

    static std::unique_ptr<Node> binary(Op op, std::unique_ptr<Node> l, std::unique_ptr<Node> r) {
      auto n = std::make_unique<Node>();
      n->op = op;
      n->lhs = std::move(l);
      n->rhs = std::move(r);
      return n;
    }
  };

  std::unique_ptr<Node> root_;
  bool uses_x_ = false;
  bool uses_y_ = false;
  std::string text_;
};

// Convenience wrapper for flat-model span entries ("1", "sqrt(2)", "3/2").
inline double parse_constant(const std::string& text) {
  Expression::Options opts;
  opts.allow_variables = false;
  opts.allow_sqrt = true;
  return Expression::parse(text, opts).constant_value();
}

}  // namespace folspec
