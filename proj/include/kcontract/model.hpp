#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kcontract/expr.hpp"

namespace kcontract {

// Axis-aligned box, the supported family of state/input domains.
struct Box {
  Eigen::VectorXd low, high;
  int dim() const { return static_cast<int>(low.size()); }
  bool empty() const { return low.size() == 0; }
  void validate() const;
  static Box cube(int n, double lo, double hi);
};

// Generalized Lurie system: the feedback interconnection of
//   xdot = f(x,u), y = g(x)   with   u = -Phi(y).
struct GlsModel {
  std::string name;
  int n = 0, m = 0, p = 0;
  VectorFunction f;    // (x in R^n, u in R^m) -> R^n
  VectorFunction g;    // x -> R^p
  VectorFunction phi;  // y in R^p -> R^m
  // Symbolic Jacobians, filled from f/g/phi unless overridden.
  ExprMatrix jac_fx, jac_fu, jac_gx, jac_phiy;
  Box state_domain;
  Box input_domain;  // may be empty; certification then samples u = -Phi(g(x))
};

struct JacobianOverrides {
  std::optional<ExprMatrix> fx, fu, gx, phiy;
};

GlsModel make_gls(std::string name, int n, int m, int p, VectorFunction f, VectorFunction g,
                  VectorFunction phi, Box state_domain, Box input_domain = {},
                  const JacobianOverrides& overrides = {});

Eigen::VectorXd closed_loop_input(const GlsModel& mdl, const Eigen::VectorXd& x);
Eigen::VectorXd closed_loop_field(const GlsModel& mdl, const Eigen::VectorXd& x);
Eigen::MatrixXd closed_loop_jacobian(const GlsModel& mdl, const Eigen::VectorXd& x);

// Jacobian blocks of the open loop evaluated at (x,u) and y = g(x).
struct GlsBlocks {
  Eigen::MatrixXd fx, fu, gx, phiy;
};
GlsBlocks eval_blocks(const GlsModel& mdl, const Eigen::VectorXd& x, const Eigen::VectorXd& u);

// ---------------------------------------------------------------------------
// Metrics Theta(x)

// Theta is either a constant matrix, a positive scalar multiple of the
// identity, or a diagonal state-dependent matrix diag(delta_1(x)..delta_n(x)).
// The auto-constructed tridiagonal metric is a diagonal metric built from the
// field's Jacobian sign structure.
struct MetricSpec {
  enum class Kind { Constant, Scalar, Diagonal };
  Kind kind = Kind::Scalar;
  Eigen::MatrixXd theta0;         // Constant
  double q = 1.0;                 // Scalar
  std::vector<Expr> deltas;       // Diagonal
  ExprMatrix delta_grads;         // delta_grads[i][j] = d delta_i / d x_j
  bool tridiagonal_auto = false;  // provenance tag for reports

  // Singular-value bounds of Theta^T Theta sampled over the domain; reported
  // in certificates, never assumed.
  double sigma1 = std::numeric_limits<double>::quiet_NaN();
  double sigma2 = std::numeric_limits<double>::quiet_NaN();

  static MetricSpec identity();
  static MetricSpec constant(Eigen::MatrixXd theta);
  static MetricSpec scalar(double q);
  static MetricSpec diagonal(std::vector<Expr> deltas, int n);

  std::string describe() const;
};

// Theta(x); throws SingularMatrixError when the condition number exceeds 1e10.
Eigen::MatrixXd theta_at(const MetricSpec& metric, const Eigen::VectorXd& x, int n);

struct ThetaEval {
  Eigen::MatrixXd theta, theta_inv, theta_dot;
};

// Theta, its inverse, and the derivative of Theta along f(x,u). The
// closed-loop variant routes through the open-loop code path at
// u = -Phi(g(x)), so the two agree bitwise there.
ThetaEval theta_eval_ol(const MetricSpec& metric, const GlsModel& mdl, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u);
ThetaEval theta_eval_cl(const MetricSpec& metric, const GlsModel& mdl, const Eigen::VectorXd& x);

// Riemannian Jacobians: Theta J Theta^-1 + Thetadot Theta^-1 for the open
// and closed loop.
Eigen::MatrixXd riemannian_jacobian_ol(const GlsModel& mdl, const MetricSpec& metric,
                                       const Eigen::VectorXd& x, const Eigen::VectorXd& u);
Eigen::MatrixXd riemannian_jacobian_cl(const GlsModel& mdl, const MetricSpec& metric,
                                       const Eigen::VectorXd& x);

// Samples sigma1 = min eig(Theta^T Theta), sigma2 = max eig(Theta^T Theta)
// over the given points and stores them in the metric.
void estimate_metric_bounds(MetricSpec& metric, int n, const std::vector<Eigen::VectorXd>& points);

// ---------------------------------------------------------------------------
// Networked systems  xdot = -d(x) + W1 f(W2 x) + v

struct NetworkedModel {
  std::string name;
  Eigen::MatrixXd W1;  // n x m
  Eigen::MatrixXd W2;  // q x n
  std::vector<Expr> d; // d[i] is a function of x_{i+1} only
  VectorFunction f_act;  // y in R^q -> R^m
  Eigen::VectorXd v;
  // Interval bounds on d_i' over the domain, and sup ||J_f||_2; these are
  // inputs to certification, not sampled estimates.
  std::vector<std::pair<double, double>> d_prime_bounds;
  double jf_norm_bound = std::numeric_limits<double>::quiet_NaN();
  // Set for the feedback-chain family: sup |r'| over the domain.
  std::optional<double> r_prime_bound;
  Box state_domain;

  int n() const { return static_cast<int>(W1.rows()); }
  int m_in() const { return static_cast<int>(W1.cols()); }
  int q_out() const { return static_cast<int>(W2.rows()); }
};

NetworkedModel make_networked(std::string name, Eigen::MatrixXd W1, Eigen::MatrixXd W2,
                              std::vector<Expr> d, VectorFunction f_act, Eigen::VectorXd v,
                              std::vector<std::pair<double, double>> d_prime_bounds,
                              double jf_norm_bound, Box state_domain = {});

Eigen::VectorXd networked_field(const NetworkedModel& net, const Eigen::VectorXd& x);
Eigen::MatrixXd networked_jacobian(const NetworkedModel& net, const Eigen::VectorXd& x);

// GLS representation used in certification: xdot = -d(x) + v + gamma*u,
// y = x, Phi(y) = -gamma^-1 W1 f(W2 y).
GlsModel networked_to_gls(const NetworkedModel& net, double gamma);

// ---------------------------------------------------------------------------
// Built-in model families

// f = Ax + Bu, g = Cx with an arbitrary feedback map phi (components in y).
GlsModel builtin_lti_lurie(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& C, std::vector<Expr> phi_components,
                           Box state_domain = {}, Box input_domain = {});

// Hopfield-type network xdot = -Dx + W1 h(W2 x) in its Lurie form
// (f = -Dx + u, g = x, Phi = -W1 h(W2 y)); h has components in y1..y_s.
GlsModel builtin_hopfield(const Eigen::MatrixXd& D, const Eigen::MatrixXd& W1,
                          const Eigen::MatrixXd& W2, std::vector<Expr> h_components,
                          Box state_domain = {});

// Feedback chain x1' = -d1(x1) + r(x_n), xi' = -di(xi) + x_{i-1} as a
// networked system with W1 = W2 = I and f(y) = (r(y_n), y_1, ..., y_{n-1}).
// d_components are functions of x1..xn (one each), r is a function of s.
NetworkedModel builtin_biochem(int n, std::vector<Expr> d_components, const Expr& r,
                               std::vector<std::pair<double, double>> d_prime_bounds,
                               double r_prime_bound);

// The worked 3-state example: d1 = sin(x1) + 1/2, d2 = 3 x2, d3 = 3 x3,
// r(s) = (1+s)/(2+s). With conservative_d1 the bound d1' in [-1,1] is used
// instead of [0,1].
NetworkedModel builtin_example31(bool conservative_d1 = false);

// ---------------------------------------------------------------------------
// State-dependent metric for tridiagonal fields

// Builds diag(delta_1..delta_n) with delta_1 = 1 and
// delta_{i+1} = delta_i * sqrt(-h_{i,i+1}/h_{i+1,i}), after verifying that
// df/dx is tridiagonal and that -h_{i,i+1} and h_{i+1,i} are positive at
// every sample point (the admissibility sign condition).
MetricSpec tridiagonal_theta(const GlsModel& mdl, const std::vector<Eigen::VectorXd>& samples);

}  // namespace kcontract
