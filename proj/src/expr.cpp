#include "mfglab/expr.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "mfglab/errors.hpp"

namespace mfglab {

struct Expr::Node {
  Op op = Op::Const;
  double value = 0.0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using Op = Expr::Op;

double fold(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Neg: return -a;
    case Op::Pow: return std::pow(a, b);
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Exp: return std::exp(a);
    case Op::Log: return std::log(a);
    case Op::Sqrt: return std::sqrt(a);
    default: return 0.0;
  }
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Expr parse_all() {
    Expr e = parse_sum();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character");
    return e;
  }

 private:
  std::string_view s_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const char* what) const {
    throw ConfigError(fmt::format("expression '{}': {} at position {}", s_, what, pos_));
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (eat('+'))
        lhs = lhs + parse_product();
      else if (eat('-'))
        lhs = lhs - parse_product();
      else
        return lhs;
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (eat('*'))
        lhs = lhs * parse_unary();
      else if (eat('/'))
        lhs = lhs / parse_unary();
      else
        return lhs;
    }
  }

  // Unary minus binds looser than ^, so -x^2 = -(x^2).
  Expr parse_unary() {
    if (eat('-')) return -parse_unary();
    if (eat('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (eat('^')) return pow(base, parse_unary());
    return base;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
      if (res.ec != std::errc()) fail("bad number");
      pos_ = static_cast<size_t>(res.ptr - s_.data());
      return Expr::constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      std::string_view id = s_.substr(start, pos_ - start);
      if (id == "x") return Expr::var(Var::X);
      if (id == "y") return Expr::var(Var::Y);
      if (id == "t") return Expr::var(Var::T);
      if (id == "pi") return Expr::constant(std::numbers::pi);
      Op fn;
      if (id == "sin")
        fn = Op::Sin;
      else if (id == "cos")
        fn = Op::Cos;
      else if (id == "exp")
        fn = Op::Exp;
      else if (id == "log")
        fn = Op::Log;
      else if (id == "sqrt")
        fn = Op::Sqrt;
      else {
        pos_ = start;
        fail("unknown identifier");
      }
      if (!eat('(')) fail("expected '(' after function name");
      Expr arg = parse_sum();
      if (!eat(')')) fail("expected ')'");
      return apply(fn, arg);
    }
    fail("unexpected character");
  }
};

}  // namespace

Expr::Expr() : node_(std::make_shared<Node>()) {}


Expr Expr::constant(double c) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = c;
  return Expr(n);
}

Expr Expr::var(Var v) {
  auto n = std::make_shared<Node>();
  n->op = v == Var::X ? Op::VarX : (v == Var::Y ? Op::VarY : Op::VarT);
  return Expr(n);
}

Expr Expr::parse(std::string_view text) { return Parser(text).parse_all(); }

Expr Expr::make(Op op, Expr a, Expr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a.node_);
  n->b = std::move(b.node_);
  return Expr(n);
}

std::optional<double> Expr::constant_value() const {
  if (node_->op == Op::Const) return node_->value;
  return std::nullopt;
}

bool Expr::is_zero() const { return node_->op == Op::Const && node_->value == 0.0; }

bool Expr::depends_on(Var v) const {
  switch (node_->op) {
    case Op::Const: return false;
    case Op::VarX: return v == Var::X;
    case Op::VarY: return v == Var::Y;
    case Op::VarT: return v == Var::T;
    case Op::Neg:
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt: return Expr(node_->a).depends_on(v);
    default: return Expr(node_->a).depends_on(v) || Expr(node_->b).depends_on(v);
  }
}

Expr operator+(const Expr& a, const Expr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb) return Expr::constant(*ca + *cb);
  if (ca && *ca == 0.0) return b;
  if (cb && *cb == 0.0) return a;
  return Expr::make(Op::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb) return Expr::constant(*ca - *cb);
  if (cb && *cb == 0.0) return a;
  if (ca && *ca == 0.0) return -b;
  return Expr::make(Op::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb) return Expr::constant(*ca * *cb);
  if ((ca && *ca == 0.0) || (cb && *cb == 0.0)) return Expr::constant(0.0);
  if (ca && *ca == 1.0) return b;
  if (cb && *cb == 1.0) return a;
  if (ca && *ca == -1.0) return -b;
  if (cb && *cb == -1.0) return -a;
  return Expr::make(Op::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb && *cb != 0.0) return Expr::constant(*ca / *cb);
  if (ca && *ca == 0.0) return Expr::constant(0.0);
  if (cb && *cb == 1.0) return a;
  return Expr::make(Op::Div, a, b);
}

Expr operator-(const Expr& a) {
  if (auto c = a.constant_value()) return Expr::constant(-*c);
  if (a.node_->op == Op::Neg) return Expr(a.node_->a);
  return Expr::make(Op::Neg, a, Expr());
}

Expr pow(const Expr& a, const Expr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb) return Expr::constant(std::pow(*ca, *cb));
  if (cb && *cb == 0.0) return Expr::constant(1.0);
  if (cb && *cb == 1.0) return a;
  return Expr::make(Op::Pow, a, b);
}

Expr apply(Expr::Op fn, const Expr& a) {
  if (auto c = a.constant_value()) return Expr::constant(fold(fn, *c, 0.0));
  return Expr::make(fn, a, Expr());
}

namespace {

double eval_node(const Expr::Node* n, double x, double y, double t);

}  // namespace

struct EvalAccess {
  static double run(const Expr::Node* n, double x, double y, double t) {
    switch (n->op) {
      case Op::Const: return n->value;
      case Op::VarX: return x;
      case Op::VarY: return y;
      case Op::VarT: return t;
      case Op::Add: return run(n->a.get(), x, y, t) + run(n->b.get(), x, y, t);
      case Op::Sub: return run(n->a.get(), x, y, t) - run(n->b.get(), x, y, t);
      case Op::Mul: return run(n->a.get(), x, y, t) * run(n->b.get(), x, y, t);
      case Op::Div: return run(n->a.get(), x, y, t) / run(n->b.get(), x, y, t);
      case Op::Neg: return -run(n->a.get(), x, y, t);
      case Op::Pow: {
        double base = run(n->a.get(), x, y, t);
        if (n->b->op == Op::Const) {
          double e = n->b->value;
          if (e == 2.0) return base * base;
          if (e == 3.0) return base * base * base;
          if (e == std::round(e) && std::fabs(e) <= 16.0) return std::pow(base, static_cast<int>(e));
          return std::pow(base, e);
        }
        return std::pow(base, run(n->b.get(), x, y, t));
      }
      default: return fold(n->op, run(n->a.get(), x, y, t), 0.0);
    }
  }
};

namespace {

double eval_node(const Expr::Node* n, double x, double y, double t) { return EvalAccess::run(n, x, y, t); }

}  // namespace

double Expr::eval(double x, double y, double t) const { return eval_node(node_.get(), x, y, t); }

Expr Expr::diff(Var v) const {
  const Node& n = *node_;
  switch (n.op) {
    case Op::Const: return constant(0.0);
    case Op::VarX: return constant(v == Var::X ? 1.0 : 0.0);
    case Op::VarY: return constant(v == Var::Y ? 1.0 : 0.0);
    case Op::VarT: return constant(v == Var::T ? 1.0 : 0.0);
    default: break;
  }
  if (!depends_on(v)) return constant(0.0);
  const Expr a(n.a);
  const Expr b = n.b ? Expr(n.b) : constant(0.0);
  switch (n.op) {
    case Op::Add: return a.diff(v) + b.diff(v);
    case Op::Sub: return a.diff(v) - b.diff(v);
    case Op::Mul: return a.diff(v) * b + a * b.diff(v);
    case Op::Div: return (a.diff(v) * b - a * b.diff(v)) / pow(b, constant(2.0));
    case Op::Neg: return -a.diff(v);
    case Op::Pow:
      if (auto c = b.constant_value()) return constant(*c) * pow(a, constant(*c - 1.0)) * a.diff(v);
      return *this * (b.diff(v) * apply(Op::Log, a) + b * a.diff(v) / a);
    case Op::Sin: return apply(Op::Cos, a) * a.diff(v);
    case Op::Cos: return -(apply(Op::Sin, a) * a.diff(v));
    case Op::Exp: return *this * a.diff(v);
    case Op::Log: return a.diff(v) / a;
    case Op::Sqrt: return a.diff(v) / (constant(2.0) * *this);
    default: return constant(0.0);
  }
}

std::string Expr::str() const {
  const Node& n = *node_;
  struct {
    const Node& n;
    std::string operator()(int which) const { return Expr(which == 0 ? n.a : n.b).str(); }
  } sub{n};
  switch (n.op) {
    case Op::Const: return fmt::format("{:.17g}", n.value);
    case Op::VarX: return "x";
    case Op::VarY: return "y";
    case Op::VarT: return "t";
    case Op::Add: return "(" + sub(0) + " + " + sub(1) + ")";
    case Op::Sub: return "(" + sub(0) + " - " + sub(1) + ")";
    case Op::Mul: return "(" + sub(0) + " * " + sub(1) + ")";
    case Op::Div: return "(" + sub(0) + " / " + sub(1) + ")";
    case Op::Neg: return "(-" + sub(0) + ")";
    case Op::Pow: return "(" + sub(0) + " ^ " + sub(1) + ")";
    case Op::Sin: return "sin(" + sub(0) + ")";
    case Op::Cos: return "cos(" + sub(0) + ")";
    case Op::Exp: return "exp(" + sub(0) + ")";
    case Op::Log: return "log(" + sub(0) + ")";
    case Op::Sqrt: return "sqrt(" + sub(0) + ")";
  }
  return "?";
}

}  // namespace mfglab
