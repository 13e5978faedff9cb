#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kcontract/errors.hpp"

namespace kcontract {

// Scalar expressions over the variable blocks x1..xn, u1..um, y1..yp and the
// single-input alias `s`. Trees are immutable after construction; sharing
// subtrees between expressions is safe, including across threads.
//
// Grammar accepted by parse():
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' integer)?            (integer exponent, may be signed)
//   base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' base
// Functions: sin, cos, tanh, exp, sqrt, abs, and sign. sign is not part of
// the user-facing surface but appears in derivatives of abs and is accepted
// back by the parser so printed derivatives re-parse.

enum class VarBlock { X, U, Y, S };

struct VarRef {
  VarBlock block = VarBlock::X;
  int index = 1;  // 1-based; S always has index 1
  bool operator==(const VarRef& o) const { return block == o.block && index == o.index; }
};

std::string var_name(VarRef v);

enum class UnaryFn { Neg, Sin, Cos, Tanh, Exp, Sqrt, Abs, Sign };
enum class BinOp { Add, Sub, Mul, Div };

class Expr {
public:
  Expr() : Expr(0.0) {}
  explicit Expr(double c);

  static Expr constant(double c) { return Expr(c); }
  static Expr variable(VarRef v);
  static Expr unary(UnaryFn fn, Expr a);
  static Expr binary(BinOp op, Expr a, Expr b);
  static Expr pow(Expr base, int exponent);

  bool is_constant() const;
  // True only for a literal constant equal to v (used to recognize exact zeros
  // produced by differentiation and folding).
  bool is_constant(double v) const;

  struct Node;
  const Node& node() const { return *node_; }

private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

inline Expr operator+(Expr a, Expr b) { return Expr::binary(BinOp::Add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(BinOp::Sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(BinOp::Mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(BinOp::Div, std::move(a), std::move(b)); }
inline Expr operator-(Expr a) { return Expr::unary(UnaryFn::Neg, std::move(a)); }

struct Expr::Node {
  enum class Kind { Const, Var, Unary, Binary, Pow };
  Kind kind;
  double value = 0.0;        // Const
  VarRef var;                // Var
  UnaryFn fn = UnaryFn::Neg; // Unary
  BinOp op = BinOp::Add;     // Binary
  int exponent = 0;          // Pow
  std::shared_ptr<const Node> a, b;
};

// Variable bindings for evaluation. A block may be left empty when the
// expression does not reference it; referencing an unbound variable throws.
struct Env {
  Eigen::VectorXd x, u, y;
  std::optional<double> s;
};

Expr parse(std::string_view text);
std::string to_string(const Expr& e);
double eval(const Expr& e, const Env& env);

// Symbolic derivative. abs differentiates to sign (with sign(0) = 0), sign
// differentiates to 0; everything else is closed-form calculus.
Expr diff(const Expr& e, VarRef v);

// Replaces every occurrence of `v` by `replacement` (used to resolve the `s`
// alias and to compose nonlinearities with linear maps).
Expr substitute(const Expr& e, VarRef v, const Expr& replacement);

// Collects the set of variables referenced by e.
std::vector<VarRef> variables_of(const Expr& e);

using ExprMatrix = std::vector<std::vector<Expr>>;

// A map R^nx x R^nu x R^ny -> R^out_dim defined componentwise by expressions.
class VectorFunction {
public:
  VectorFunction() = default;
  // Validates that every referenced variable fits the declared arities and
  // that no unresolved `s` alias remains.
  VectorFunction(std::vector<Expr> components, int nx, int nu, int ny);

  int out_dim() const { return static_cast<int>(components_.size()); }
  int arity(VarBlock b) const;
  const std::vector<Expr>& components() const { return components_; }

  Eigen::VectorXd operator()(const Env& env) const;

private:
  std::vector<Expr> components_;
  int nx_ = 0, nu_ = 0, ny_ = 0;
};

// Entry (i,j) is d components[i] / d <block>_{j+1}.
ExprMatrix jacobian(const VectorFunction& F, VarBlock block);

Eigen::MatrixXd eval_matrix(const ExprMatrix& M, const Env& env);

// Parses each string and resolves `s` to the given variable (pass nullopt to
// require that `s` does not occur).
std::vector<Expr> parse_components(const std::vector<std::string>& texts,
                                   std::optional<VarRef> s_target);

}  // namespace kcontract
