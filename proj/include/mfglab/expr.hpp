#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace mfglab {

enum class Var { X, Y, T };

// Immutable closed-form expression in x, y, t.
// Grammar: + - * / ^, unary minus, parentheses, numbers, x y t pi,
// and the functions sin cos exp log sqrt.
class Expr {
 public:
  enum class Op { Const, VarX, VarY, VarT, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log, Sqrt };

  Expr();  // constant 0
  static Expr parse(std::string_view text);
  static Expr constant(double c);
  static Expr var(Var v);

  double eval(double x, double y, double t) const;
  Expr diff(Var v) const;
  std::optional<double> constant_value() const;
  bool is_zero() const;
  bool depends_on(Var v) const;
  std::string str() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& a, const Expr& b);
  friend Expr apply(Op fn, const Expr& a);

  struct Node;

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make(Op op, Expr a, Expr b);
  std::shared_ptr<const Node> node_;
};

Expr pow(const Expr& a, const Expr& b);
Expr apply(Expr::Op fn, const Expr& a);

}  // namespace mfglab
