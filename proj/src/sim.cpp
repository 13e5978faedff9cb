#include "kcontract/sim.hpp"

#include <cmath>

#include "kcontract/compound.hpp"
#include "kcontract/errors.hpp"
#include "kcontract/rng.hpp"

namespace kcontract {

void SimConfig::validate() const {
  if (!(rtol > 0) || !(atol > 0)) throw DimensionError("solver tolerances must be positive");
  if (!(t_end > 0)) throw DimensionError("t_end must be positive");
  if (!(max_step > 0)) throw DimensionError("max_step must be positive");
}

namespace {

// Dormand-Prince 4(5) tableau. b5 propagates (local extrapolation); e = b5-b4
// drives the error estimate. First-same-as-last: k7 of an accepted step is k1
// of the next.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                 e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

struct StepResult {
  Eigen::VectorXd y_new;
  Eigen::VectorXd f_new;  // field at (t+h, y_new), reusable via FSAL
  double err = 0;         // weighted RMS error estimate
};

class Dopri5 {
public:
  Dopri5(const Field& field, const SimConfig& cfg) : field_(field), cfg_(cfg) {}

  // One trial step from (t, y) with derivative f0 already evaluated.
  StepResult trial(double t, const Eigen::VectorXd& y, const Eigen::VectorXd& f0, double h) {
    const Eigen::VectorXd k1 = f0;
    const Eigen::VectorXd k2 = field_(t + c2 * h, y + h * (a21 * k1));
    const Eigen::VectorXd k3 = field_(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = field_(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 =
        field_(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 =
        field_(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    StepResult r;
    r.y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    r.f_new = field_(t + h, r.y_new);  // k7
    const Eigen::VectorXd err_vec =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.f_new);
    double acc = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double scale =
          cfg_.atol + cfg_.rtol * std::max(std::abs(y(i)), std::abs(r.y_new(i)));
      const double q = err_vec(i) / scale;
      acc += q * q;
    }
    r.err = std::sqrt(acc / static_cast<double>(y.size()));
    if (!std::isfinite(r.err) || !r.y_new.allFinite())
      r.err = std::numeric_limits<double>::infinity();
    return r;
  }

  double initial_step(const Eigen::VectorXd& y, const Eigen::VectorXd& f0) const {
    const double d0 = y.norm(), d1 = f0.norm();
    double h = (d1 > 1e-10) ? 0.01 * std::max(d0, 1.0) / d1 : 1e-4;
    return std::min({h, cfg_.max_step, cfg_.t_end});
  }

private:
  const Field& field_;
  const SimConfig& cfg_;
};

void check_finite_field(const Eigen::VectorXd& f, double t) {
  if (!f.allFinite())
    throw SolverError("vector field returned a non-finite value at t=" + std::to_string(t));
}

}  // namespace

Eigen::VectorXd Trajectory::at(double t) const {
  if (times.empty()) throw SolverError("empty trajectory");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  std::size_t hi = 1;
  while (times[hi] < t) ++hi;
  const std::size_t lo = hi - 1;
  const double h = times[hi] - times[lo];
  const double s = (t - times[lo]) / h;
  // Cubic Hermite basis on [0,1] with endpoint values and derivatives.
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  return h00 * states[lo] + h10 * h * derivatives[lo] + h01 * states[hi] +
         h11 * h * derivatives[hi];
}

namespace {

// Core loop shared by the plain and variational integrators. `on_accept` is
// called after every accepted step.
template <typename OnAccept>
Trajectory integrate_core(const Field& field, const Eigen::VectorXd& x0, const SimConfig& cfg,
                          OnAccept&& on_accept) {
  cfg.validate();
  Dopri5 stepper(field, cfg);

  double t = 0;
  Eigen::VectorXd y = x0;
  Eigen::VectorXd f0 = field(t, y);
  check_finite_field(f0, t);

  Trajectory traj;
  traj.times.push_back(t);
  traj.states.push_back(y);
  traj.derivatives.push_back(f0);
  on_accept(traj);

  double h = stepper.initial_step(y, f0);
  while (t < cfg.t_end) {
    h = std::min({h, cfg.max_step, cfg.t_end - t});
    if (h < 1e-14 * std::max(std::abs(t), 1.0))
      throw SolverError("step size underflow at t=" + std::to_string(t) +
                        "; the problem appears stiff for this explicit solver");
    StepResult r = stepper.trial(t, y, f0, h);
    ++traj.steps;
    if (r.err <= 1.0) {
      t += h;
      traj.times.push_back(t);
      traj.states.push_back(r.y_new);
      traj.derivatives.push_back(r.f_new);
      on_accept(traj);
      // on_accept may rescale the stored state (volume renormalization);
      // continue from whatever it left there.
      y = traj.states.back();
      f0 = traj.derivatives.back();
    } else {
      ++traj.rejected;
    }
    const double factor = (r.err == 0)
                              ? 5.0
                              : std::clamp(0.9 * std::pow(r.err, -0.2), 0.2, 5.0);
    h *= factor;
  }
  return traj;
}

}  // namespace

Trajectory integrate(const Field& field, const Eigen::VectorXd& x0, const SimConfig& cfg) {
  return integrate_core(field, x0, cfg, [](const Trajectory&) {});
}

std::pair<Trajectory, VolumeTrace> integrate_with_variational(
    const Field& field, const FieldJacobian& jac, const Eigen::VectorXd& x0,
    const Eigen::MatrixXd& W0, const SimConfig& cfg, const ThetaFn& theta) {
  const int n = static_cast<int>(x0.size());
  const int kcols = static_cast<int>(W0.cols());
  if (W0.rows() != n) throw DimensionError("W0 must have n rows");
  if (kcols < 1 || kcols > n) throw DimensionError("W0 must have between 1 and n columns");
  if (mult_compound(W0, kcols).norm() == 0.0)
    throw DimensionError("W0 must have full column rank");

  // Augmented state [x; vec(W)].
  const auto unpack_x = [n](const Eigen::VectorXd& z) { return Eigen::VectorXd(z.head(n)); };
  const auto unpack_W = [n, kcols](const Eigen::VectorXd& z) {
    return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(z.data() + n, n, kcols));
  };
  Field aug = [&](double t, const Eigen::VectorXd& z) {
    const Eigen::VectorXd x = unpack_x(z);
    const Eigen::MatrixXd W = unpack_W(z);
    Eigen::VectorXd out(z.size());
    out.head(n) = field(t, x);
    Eigen::Map<Eigen::MatrixXd>(out.data() + n, n, kcols) = jac(t, x) * W;
    return out;
  };

  Eigen::VectorXd z0(n + n * kcols);
  z0.head(n) = x0;
  Eigen::Map<Eigen::MatrixXd>(z0.data() + n, n, kcols) = W0;

  VolumeTrace trace;
  // log2 rescaling offset accumulated when |W^(k)| underflows; exact because
  // powers of two only touch the exponent bits.
  double log_offset = 0;
  const double kLog2 = std::log(2.0);

  auto on_accept = [&](Trajectory& traj) {
    Eigen::VectorXd& z = traj.states.back();
    const Eigen::VectorXd x = unpack_x(z);
    Eigen::MatrixXd W = unpack_W(z);
    const Eigen::VectorXd wk = mult_compound(W, kcols);
    // stableNorm: a plain norm squares the minors and underflows around
    // 1e-162, far above the renormalization threshold
    const double vol = wk.stableNorm();
    double wvol = vol;
    if (theta) {
      wvol = Eigen::VectorXd(mult_compound(theta(x), kcols) * wk).stableNorm();
    }
    trace.times.push_back(traj.times.back());
    trace.logvol.push_back(vol > 0 ? std::log(vol) + log_offset
                                   : -std::numeric_limits<double>::infinity());
    trace.weighted_logvol.push_back(wvol > 0 ? std::log(wvol) + log_offset
                                             : -std::numeric_limits<double>::infinity());
    if (vol > 0 && vol < 1e-280) {
      // W <- 2^s W so that |W^(k)| returns to O(1); carry k*s*log(2).
      const int s = static_cast<int>(std::ceil(-std::log2(vol) / kcols));
      const double scale = std::ldexp(1.0, s);
      W *= scale;
      Eigen::Map<Eigen::MatrixXd>(z.data() + n, n, kcols) = W;
      log_offset -= static_cast<double>(s) * kcols * kLog2;
      traj.derivatives.back().tail(n * kcols) *= scale;
    }
  };

  Trajectory traj = integrate_core(aug, z0, cfg, on_accept);

  // Strip the variational block so callers get a plain state trajectory.
  Trajectory out;
  out.steps = traj.steps;
  out.rejected = traj.rejected;
  out.times = traj.times;
  out.states.reserve(traj.states.size());
  out.derivatives.reserve(traj.states.size());
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    out.states.push_back(traj.states[i].head(n));
    out.derivatives.push_back(traj.derivatives[i].head(n));
  }
  return {std::move(out), std::move(trace)};
}

std::optional<Eigen::VectorXd> detect_equilibrium(const Trajectory& traj, const Field& field,
                                                  double tol) {
  if (traj.times.empty()) return std::nullopt;
  const Eigen::VectorXd& e = traj.states.back();
  const double t_end = traj.times.back();
  if (field(t_end, e).norm() >= tol) return std::nullopt;
  const double t_from = traj.times.front() + 0.9 * (t_end - traj.times.front());
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.times[i] < t_from) continue;
    if ((traj.states[i] - e).norm() >= tol) return std::nullopt;
  }
  return e;
}

std::vector<Eigen::VectorXd> sample_initials(const Box& box, int count, std::uint64_t seed) {
  box.validate();
  if (box.empty()) throw DimensionError("sample_initials: empty box");
  if (count < 1) throw DimensionError("sample_initials: count must be >= 1");
  SplitMix64 rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x(box.dim());
    for (int j = 0; j < box.dim(); ++j) x(j) = rng.uniform(box.low(j), box.high(j));
    out.push_back(std::move(x));
  }
  return out;
}

double equilibrium_residual_1d(double e3) {
  return std::sin(9.0 * e3) + 0.5 - (1.0 + e3) / (2.0 + e3);
}

std::vector<double> equilibrium_residual_roots(double lo, double hi, int scan_points) {
  std::vector<double> roots;
  if (equilibrium_residual_1d(lo) == 0.0) roots.push_back(lo);
  double prev = equilibrium_residual_1d(lo);
  double tprev = lo;
  for (int i = 1; i <= scan_points; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / scan_points;
    const double cur = equilibrium_residual_1d(t);
    if (cur == 0.0) {
      roots.push_back(t);
    } else if (prev * cur < 0) {
      double a = tprev, b = t;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = equilibrium_residual_1d(mid);
        if (fm == 0.0) { a = b = mid; break; }
        if (equilibrium_residual_1d(a) * fm < 0) b = mid; else a = mid;
        if (b - a < 1e-15 * std::max(1.0, std::abs(a))) break;
      }
      roots.push_back(0.5 * (a + b));
    }
    prev = cur;
    tprev = t;
  }
  return roots;
}

double fit_slope(const std::vector<double>& t, const std::vector<double>& y, double t_from) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  long count = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_from || !std::isfinite(y[i])) continue;
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
    ++count;
  }
  if (count < 2) throw DimensionError("fit_slope: not enough points past t_from");
  const double denom = count * stt - st * st;
  if (denom == 0) throw DimensionError("fit_slope: degenerate time samples");
  return (count * sty - st * sy) / denom;
}

Field field_of(const GlsModel& mdl) {
  return [&mdl](double, const Eigen::VectorXd& x) { return closed_loop_field(mdl, x); };
}

FieldJacobian jacobian_of(const GlsModel& mdl) {
  return [&mdl](double, const Eigen::VectorXd& x) { return closed_loop_jacobian(mdl, x); };
}

Field field_of(const NetworkedModel& net) {
  return [&net](double, const Eigen::VectorXd& x) { return networked_field(net, x); };
}

FieldJacobian jacobian_of(const NetworkedModel& net) {
  return [&net](double, const Eigen::VectorXd& x) { return networked_jacobian(net, x); };
}

ThetaFn theta_fn(const MetricSpec& metric, int n) {
  return [metric, n](const Eigen::VectorXd& x) { return theta_at(metric, x, n); };
}

}  // namespace kcontract
