#ifndef PWAVE_EXPR_HPP
#define PWAVE_EXPR_HPP

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pwave/errors.hpp"

namespace pwave::expr {

// Truncated Taylor series at a basepoint: coeffs[k] is the k-th Taylor
// coefficient, so the k-th derivative is k! * coeffs[k].
class Jet {
 public:
  Jet(double basepoint, int order);
  static Jet constant(double value, double basepoint, int order);
  static Jet variable(double value, int order);  // seed [value, 1, 0, ...]

  int order() const { return static_cast<int>(coeffs_.size()) - 1; }
  double basepoint() const { return base_; }
  double operator[](int k) const { return coeffs_[static_cast<std::size_t>(k)]; }
  double& operator[](int k) { return coeffs_[static_cast<std::size_t>(k)]; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  double value() const { return coeffs_[0]; }
  double derivative(int k) const;  // k! * coeffs[k]

  friend Jet operator+(const Jet& a, const Jet& b);
  friend Jet operator-(const Jet& a, const Jet& b);
  friend Jet operator-(const Jet& a);
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);  // EvalError on zero lead
  Jet pow(int n) const;                              // integer exponents only
  friend Jet exp(const Jet& a);
  friend Jet log(const Jet& a);  // EvalError unless value() > 0
  friend Jet sin(const Jet& a);
  friend Jet cos(const Jet& a);

 private:
  double base_ = 0.0;
  std::vector<double> coeffs_;
};

// Immutable expression tree over one declared variable, with exp, log, sin,
// cos, integer powers, and the four arithmetic operators.
class Expr {
 public:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sin, Cos };

  struct Node {
    Op op = Op::Const;
    double value = 0.0;  // Const payload
    int exponent = 0;    // Pow payload
    int a = -1, b = -1;  // child indices
  };

  Expr() = default;

  const std::string& variable() const { return var_; }
  const std::string& source() const { return source_; }
  bool empty() const { return nodes_.empty(); }
  bool uses_variable() const;

  double eval(double x) const;
  Jet at(double x, int order) const;  // evaluate in Jet arithmetic

  static Expr parse_tree(std::string_view src, std::string_view variable);

 private:
  friend Expr parse(std::string_view, std::string_view);
  std::vector<Node> nodes_;
  int root_ = -1;
  std::string var_;
  std::string source_;
};

// Parses per the declared grammar. ParseError carries the byte offset of the
// first offending character. The variable name defaults to "y".
Expr parse(std::string_view src, std::string_view variable = "y");

// Taylor coefficients [f(x0), f'(x0), f''(x0)/2!, ...] through the given order.
std::vector<double> jet(const Expr& e, double x0, int order);

// Sparse multivariate polynomial with exact partial derivatives. Exponent
// keys are dense per-variable vectors of fixed length nvars.
class Poly {
 public:
  Poly() = default;
  explicit Poly(int nvars) : nvars_(nvars) {}
  static Poly constant(int nvars, double c);
  static Poly variable(int nvars, int which);

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  const std::map<std::vector<int>, double>& terms() const { return terms_; }

  double eval(std::span<const double> x) const;
  Poly partial(int var) const;
  int degree() const;

  Poly& add_term(std::vector<int> expo, double coeff);

  friend Poly operator+(const Poly& a, const Poly& b);
  friend Poly operator-(const Poly& a, const Poly& b);
  friend Poly operator*(const Poly& a, const Poly& b);
  friend Poly operator*(double s, const Poly& a);
  Poly pow(int n) const;  // n >= 0

 private:
  int nvars_ = 0;
  std::map<std::vector<int>, double> terms_;
};

// Parses a polynomial over the named variables. Division is accepted only by
// a constant, exponents must be non-negative integers, and the transcendental
// functions are rejected; violations raise ParseError at the offending byte.
Poly parse_poly(std::string_view src, std::span<const std::string> variables);

}  // namespace pwave::expr

#endif
