#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "kcontract/model.hpp"

namespace kcontract {

using Field = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
using FieldJacobian = std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)>;
using ThetaFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct SimConfig {
  double t_end = 10.0;
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  void validate() const;
};

struct Trajectory {
  std::vector<double> times;                 // strictly increasing
  std::vector<Eigen::VectorXd> states;       // one per accepted step
  std::vector<Eigen::VectorXd> derivatives;  // field at each accepted step
  long steps = 0;
  long rejected = 0;

  const Eigen::VectorXd& final_state() const { return states.back(); }
  // Cubic Hermite interpolation between accepted steps (dense output).
  Eigen::VectorXd at(double t) const;
};

// Log of the k-parallelotope volume |W^(k)(t)|_2 along a trajectory, with
// k = cols(W0), and its Theta-weighted analogue |Theta^(k)(x) W^(k)|_2.
// Entries are -inf once W loses full column rank. The integrator rescales W
// by powers of two when the volume underflows and carries the exact log
// offset, so logvol stays meaningful over long horizons.
struct VolumeTrace {
  std::vector<double> times;
  std::vector<double> logvol;
  std::vector<double> weighted_logvol;
};

// Adaptive embedded Runge-Kutta 4(5) with the Dormand-Prince coefficients.
// Throws SolverError on step-size underflow (reported as stiffness) or NaN.
Trajectory integrate(const Field& field, const Eigen::VectorXd& x0, const SimConfig& cfg);

// Co-integrates xdot = field(x), Wdot = J(x) W and records the volume trace
// at every accepted step. theta may be null (unweighted trace repeated).
std::pair<Trajectory, VolumeTrace> integrate_with_variational(
    const Field& field, const FieldJacobian& jac, const Eigen::VectorXd& x0,
    const Eigen::MatrixXd& W0, const SimConfig& cfg, const ThetaFn& theta = nullptr);

// The final state when the trajectory has settled: |field(e)| < tol and the
// state moved less than tol over the last 10% of the horizon.
std::optional<Eigen::VectorXd> detect_equilibrium(const Trajectory& traj, const Field& field,
                                                  double tol);

// Deterministic uniform samples in a box (SplitMix64 sequence for the seed).
std::vector<Eigen::VectorXd> sample_initials(const Box& box, int count, std::uint64_t seed);

// Residual whose roots e3 characterize the equilibria e = (9 e3, 3 e3, e3)
// of the worked 3-state feedback chain: sin(9 e3) + 1/2 - (1+e3)/(2+e3).
double equilibrium_residual_1d(double e3);

// Roots of the residual in [lo, hi]: sign-change scan plus bisection.
std::vector<double> equilibrium_residual_roots(double lo, double hi, int scan_points = 4000);

// Least-squares slope of y(t) restricted to t >= t_from.
double fit_slope(const std::vector<double>& t, const std::vector<double>& y, double t_from);

// Adapters bridging models to the integrator.
Field field_of(const GlsModel& mdl);
FieldJacobian jacobian_of(const GlsModel& mdl);
Field field_of(const NetworkedModel& net);
FieldJacobian jacobian_of(const NetworkedModel& net);
ThetaFn theta_fn(const MetricSpec& metric, int n);

}  // namespace kcontract
