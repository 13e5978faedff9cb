#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kcontract/model.hpp"

namespace kcontract {

// Sampling plan that realizes the "for all x,u" quantifiers: a regular grid
// (points_per_axis per coordinate) plus optional uniform random refinement.
// When the model has an input box, the H and feedback conditions are checked
// on the product of the x samples with the u samples *and* with the
// closed-loop input u = -Phi(g(x)); with no input box only the closed-loop
// inputs are used.
struct DomainGrid {
  Box x_box;
  std::optional<Box> u_box;
  int points_per_axis = 5;
  long refine = 0;
  std::uint64_t seed = 1;
  long cap = 1000000;  // throw when the total sample count would exceed this
};

std::vector<Eigen::VectorXd> grid_points(const Box& box, int points_per_axis, long refine,
                                         std::uint64_t seed, long cap);

// Machine-checkable outcome of a certification run. Sampled certificates are
// falsification-resistant evidence, not formal proofs; the interval-bound
// modes (networked, biochem) are rigorous given the supplied bounds.
//
// worst_margin is the slack of the binding strict condition: eta1+eta2 for
// the eigenvalue modes, min(alpha_k, alpha_k^2 k - small-gain lhs) for the
// networked mode, min(alpha_k - 1, alpha_k^2 - r'^2) for the biochem mode.
// certified implies worst_margin > 0.
struct Certificate {
  int k = 1;
  double eta1 = std::numeric_limits<double>::quiet_NaN();
  double eta2 = std::numeric_limits<double>::quiet_NaN();
  double rate = std::numeric_limits<double>::quiet_NaN();  // (eta1+eta2)/2
  bool certified = false;
  double worst_margin = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd argmin_x, argmin_u;  // sample attaining the binding maximum
  std::string mode;                    // thm1-B | thm1-C | ari | lti | networked | biochem
  double sigma1 = std::numeric_limits<double>::quiet_NaN();  // sampled bounds on Theta^T Theta
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  long samples = 0;
  std::uint64_t seed = 0;
  std::string grid_shape;
  std::string metric_description;
  // Smallest slack of the conclusion inequality
  // sum_i lambda_i(Jcl~ + Jcl~^T) <= -(eta1+eta2) over the x samples.
  double conclusion_margin = std::numeric_limits<double>::quiet_NaN();
  // Extras for the networked/biochem modes.
  double alpha_k = std::numeric_limits<double>::quiet_NaN();
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double metric_p = std::numeric_limits<double>::quiet_NaN();  // Theta = sqrt(p) I
  double smallgain_lhs = std::numeric_limits<double>::quiet_NaN();
  double smallgain_rhs = std::numeric_limits<double>::quiet_NaN();

  std::string summary() const;
};

// Strict inequalities are checked with this slack.
inline constexpr double kStrictSlack = 1e-12;

// The symmetric matrix H of the main sufficient condition:
//   H = Jol~ + Jol~^T + Theta df/du (df/du)^T Theta^T
//       + Theta^-T (dg/dx)^T dg/dx Theta^-1.
Eigen::MatrixXd h_matrix(const GlsModel& mdl, const MetricSpec& metric, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u);

// Main sampled certificate: eta1 from the top-k eigenvalue sum of H, eta2
// from both feedback conditions (the B-side through df/du and the C-side
// through dg/dx), keeping the larger valid value; certified iff
// eta1 + eta2 > 0. The conclusion inequality is re-checked on every x sample.
Certificate certify_gls(const GlsModel& mdl, MetricSpec metric, int k, const DomainGrid& grid);

// Constant-metric algebraic Riccati form of the eta1 condition, P = Theta^T
// Theta: the largest eta1 with
//   P^(k) (df/dx)^[k] + ((df/dx)^[k])^T P^(k)
//     + (Theta^T)^(k) (...)^[k] Theta^(k)  <=  -eta1 P^(k)
// at every sample, found by bisection. Agrees with the eigenvalue form by
// congruence; the returned certificate carries the eigenvalue-form value in
// eta1 of certify_gls for comparison in tests.
Certificate ari_constant_theta(const GlsModel& mdl, const Eigen::MatrixXd& P, int k,
                               const DomainGrid& grid);

// Specialization to f = Ax + Bu, g = Cx with constant symmetric Theta,
// Theta^2 = P. The eta1 condition is state-independent; eta2 is sampled over
// an output grid.
Certificate certify_lti_lurie(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const Eigen::MatrixXd& C, const VectorFunction& phi,
                              const Eigen::MatrixXd& P, int k, const Box& y_box,
                              int y_points_per_axis = 9, long y_refine = 0,
                              std::uint64_t seed = 1);

// k-total dissipation: k^-1 * (sum of the k smallest lower bounds of d').
double alpha_k_from_bounds(const std::vector<std::pair<double, double>>& d_prime_bounds, int k);

// Interval-bound small-gain certificate for networked systems:
// alpha_k > 0 and jf^2 * sum_i sigma_i^2(W1) sigma_i^2(W2) < alpha_k^2 k
// (strict). On success gamma is the geometric mean of the admissible
// extremes, the metric scaling is p = alpha_k / gamma^2 and
// eta1 = (alpha_k^2 - gamma^2)/alpha_k.
Certificate certify_networked(const NetworkedModel& net, int k);

// Feedback-chain criterion: certified iff alpha_k > 1 and
// (sup |r'|)^2 < alpha_k^2, both strict.
Certificate certify_biochem(double r_prime_bound,
                            const std::vector<std::pair<double, double>>& d_prime_bounds, int k);

// Scans k, k+1, ..., n for the smallest order at which certify_networked
// passes. Once an order passes, every larger order is verified to pass too
// (the conditions are monotone in k).
struct Escalation {
  std::optional<int> k_star;
  std::vector<Certificate> per_k;  // certificates for each order tried
};
Escalation monotone_escalate(const NetworkedModel& net, int k_from);

}  // namespace kcontract
