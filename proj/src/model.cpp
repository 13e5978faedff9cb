#include "kcontract/model.hpp"

#include <cmath>

#include "kcontract/spectral.hpp"

namespace kcontract {

void Box::validate() const {
  if (low.size() != high.size()) throw DimensionError("box: low/high dimension mismatch");
  for (Eigen::Index i = 0; i < low.size(); ++i)
    if (!(low(i) <= high(i)))
      throw DimensionError("box: low > high in coordinate " + std::to_string(i + 1));
}

Box Box::cube(int n, double lo, double hi) {
  Box b;
  b.low = Eigen::VectorXd::Constant(n, lo);
  b.high = Eigen::VectorXd::Constant(n, hi);
  b.validate();
  return b;
}

GlsModel make_gls(std::string name, int n, int m, int p, VectorFunction f, VectorFunction g,
                  VectorFunction phi, Box state_domain, Box input_domain,
                  const JacobianOverrides& overrides) {
  if (n < 1 || m < 1 || p < 1) throw DimensionError("model dimensions must be positive");
  if (f.out_dim() != n || f.arity(VarBlock::X) != n || f.arity(VarBlock::U) != m)
    throw DimensionError("f must map (R^n, R^m) -> R^n");
  if (g.out_dim() != p || g.arity(VarBlock::X) != n)
    throw DimensionError("g must map R^n -> R^p");
  if (phi.out_dim() != m || phi.arity(VarBlock::Y) != p)
    throw DimensionError("phi must map R^p -> R^m");
  if (state_domain.empty()) state_domain = Box::cube(n, -1.0, 1.0);
  state_domain.validate();
  if (state_domain.dim() != n) throw DimensionError("state domain dimension != n");
  if (!input_domain.empty()) {
    input_domain.validate();
    if (input_domain.dim() != m) throw DimensionError("input domain dimension != m");
  }

  GlsModel mdl;
  mdl.name = std::move(name);
  mdl.n = n;
  mdl.m = m;
  mdl.p = p;
  mdl.f = std::move(f);
  mdl.g = std::move(g);
  mdl.phi = std::move(phi);
  mdl.state_domain = std::move(state_domain);
  mdl.input_domain = std::move(input_domain);
  mdl.jac_fx = overrides.fx ? *overrides.fx : jacobian(mdl.f, VarBlock::X);
  mdl.jac_fu = overrides.fu ? *overrides.fu : jacobian(mdl.f, VarBlock::U);
  mdl.jac_gx = overrides.gx ? *overrides.gx : jacobian(mdl.g, VarBlock::X);
  mdl.jac_phiy = overrides.phiy ? *overrides.phiy : jacobian(mdl.phi, VarBlock::Y);
  return mdl;
}

Eigen::VectorXd closed_loop_input(const GlsModel& mdl, const Eigen::VectorXd& x) {
  Env env;
  env.x = x;
  env.y = mdl.g(env);
  return -mdl.phi(env);
}

Eigen::VectorXd closed_loop_field(const GlsModel& mdl, const Eigen::VectorXd& x) {
  Env env;
  env.x = x;
  env.y = mdl.g(env);
  env.u = -mdl.phi(env);
  return mdl.f(env);
}

GlsBlocks eval_blocks(const GlsModel& mdl, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Env env;
  env.x = x;
  env.u = u;
  env.y = mdl.g(env);
  GlsBlocks b;
  b.fx = eval_matrix(mdl.jac_fx, env);
  b.fu = eval_matrix(mdl.jac_fu, env);
  b.gx = eval_matrix(mdl.jac_gx, env);
  b.phiy = eval_matrix(mdl.jac_phiy, env);
  return b;
}

Eigen::MatrixXd closed_loop_jacobian(const GlsModel& mdl, const Eigen::VectorXd& x) {
  const GlsBlocks b = eval_blocks(mdl, x, closed_loop_input(mdl, x));
  return b.fx - b.fu * b.phiy * b.gx;
}

// ---------------------------------------------------------------------------
// Metrics

MetricSpec MetricSpec::identity() { return scalar(1.0); }

MetricSpec MetricSpec::constant(Eigen::MatrixXd theta) {
  if (theta.rows() != theta.cols()) throw DimensionError("metric: Theta must be square");
  MetricSpec ms;
  ms.kind = Kind::Constant;
  ms.theta0 = std::move(theta);
  return ms;
}

MetricSpec MetricSpec::scalar(double q) {
  if (!(q > 0)) throw DimensionError("metric: scalar q must be positive");
  MetricSpec ms;
  ms.kind = Kind::Scalar;
  ms.q = q;
  return ms;
}

MetricSpec MetricSpec::diagonal(std::vector<Expr> deltas, int n) {
  if (static_cast<int>(deltas.size()) != n)
    throw DimensionError("metric: need exactly n diagonal entries");
  MetricSpec ms;
  ms.kind = Kind::Diagonal;
  ms.deltas = std::move(deltas);
  ms.delta_grads.resize(n);
  for (int i = 0; i < n; ++i) {
    ms.delta_grads[i].reserve(n);
    for (int j = 1; j <= n; ++j) ms.delta_grads[i].push_back(diff(ms.deltas[i], {VarBlock::X, j}));
  }
  return ms;
}

std::string MetricSpec::describe() const {
  switch (kind) {
    case Kind::Constant: return "constant";
    case Kind::Scalar: return "scalar(q=" + std::to_string(q) + ")";
    case Kind::Diagonal:
      return tridiagonal_auto ? "tridiagonal-auto diagonal" : "diagonal state-dependent";
  }
  return "?";
}

Eigen::MatrixXd theta_at(const MetricSpec& metric, const Eigen::VectorXd& x, int n) {
  Eigen::MatrixXd theta;
  switch (metric.kind) {
    case MetricSpec::Kind::Constant:
      if (metric.theta0.rows() != n) throw DimensionError("metric dimension != n");
      theta = metric.theta0;
      break;
    case MetricSpec::Kind::Scalar:
      theta = metric.q * Eigen::MatrixXd::Identity(n, n);
      break;
    case MetricSpec::Kind::Diagonal: {
      if (static_cast<int>(metric.deltas.size()) != n)
        throw DimensionError("metric dimension != n");
      Env env;
      env.x = x;
      theta = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) theta(i, i) = eval(metric.deltas[i], env);
      break;
    }
  }
  const Eigen::VectorXd sv = singular_values_desc(theta);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0) || sv(0) / smin > 1e10)
    throw SingularMatrixError("metric Theta is singular or ill-conditioned at a sample point");
  return theta;
}

ThetaEval theta_eval_ol(const MetricSpec& metric, const GlsModel& mdl, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u) {
  ThetaEval out;
  out.theta = theta_at(metric, x, mdl.n);
  out.theta_inv = out.theta.partialPivLu().solve(Eigen::MatrixXd::Identity(mdl.n, mdl.n));
  if (metric.kind != MetricSpec::Kind::Diagonal) {
    out.theta_dot = Eigen::MatrixXd::Zero(mdl.n, mdl.n);
    return out;
  }
  Env env;
  env.x = x;
  env.u = u;
  const Eigen::VectorXd field = mdl.f(env);
  out.theta_dot = Eigen::MatrixXd::Zero(mdl.n, mdl.n);
  for (int i = 0; i < mdl.n; ++i) {
    double dot = 0;
    for (int j = 0; j < mdl.n; ++j) dot += eval(metric.delta_grads[i][j], env) * field(j);
    out.theta_dot(i, i) = dot;
  }
  return out;
}

ThetaEval theta_eval_cl(const MetricSpec& metric, const GlsModel& mdl, const Eigen::VectorXd& x) {
  return theta_eval_ol(metric, mdl, x, closed_loop_input(mdl, x));
}

Eigen::MatrixXd riemannian_jacobian_ol(const GlsModel& mdl, const MetricSpec& metric,
                                       const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  const ThetaEval te = theta_eval_ol(metric, mdl, x, u);
  Env env;
  env.x = x;
  env.u = u;
  env.y = mdl.g(env);
  const Eigen::MatrixXd fx = eval_matrix(mdl.jac_fx, env);
  return te.theta * fx * te.theta_inv + te.theta_dot * te.theta_inv;
}

Eigen::MatrixXd riemannian_jacobian_cl(const GlsModel& mdl, const MetricSpec& metric,
                                       const Eigen::VectorXd& x) {
  const ThetaEval te = theta_eval_cl(metric, mdl, x);
  return te.theta * closed_loop_jacobian(mdl, x) * te.theta_inv + te.theta_dot * te.theta_inv;
}

void estimate_metric_bounds(MetricSpec& metric, int n, const std::vector<Eigen::VectorXd>& points) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0;
  if (metric.kind != MetricSpec::Kind::Diagonal) {
    // Constant metrics need a single evaluation.
    const Eigen::MatrixXd theta = theta_at(metric, Eigen::VectorXd::Zero(n), n);
    const Eigen::VectorXd ev = sym_eigs_desc(theta.transpose() * theta);
    lo = ev(ev.size() - 1);
    hi = ev(0);
  } else {
    for (const auto& x : points) {
      const Eigen::MatrixXd theta = theta_at(metric, x, n);
      const Eigen::VectorXd ev = sym_eigs_desc(theta.transpose() * theta);
      lo = std::min(lo, ev(ev.size() - 1));
      hi = std::max(hi, ev(0));
    }
    if (points.empty()) throw DimensionError("metric bound estimation needs sample points");
  }
  metric.sigma1 = lo;
  metric.sigma2 = hi;
}

// ---------------------------------------------------------------------------
// Networked systems

NetworkedModel make_networked(std::string name, Eigen::MatrixXd W1, Eigen::MatrixXd W2,
                              std::vector<Expr> d, VectorFunction f_act, Eigen::VectorXd v,
                              std::vector<std::pair<double, double>> d_prime_bounds,
                              double jf_norm_bound, Box state_domain) {
  const int n = static_cast<int>(W1.rows());
  if (W2.cols() != n) throw DimensionError("networked: W2 must have n columns");
  if (f_act.arity(VarBlock::Y) != W2.rows())
    throw DimensionError("networked: activation input dimension != rows(W2)");
  if (f_act.out_dim() != W1.cols())
    throw DimensionError("networked: activation output dimension != cols(W1)");
  if (static_cast<int>(d.size()) != n) throw DimensionError("networked: need n dissipation terms");
  if (v.size() != n) throw DimensionError("networked: offset dimension != n");
  if (!d_prime_bounds.empty() && static_cast<int>(d_prime_bounds.size()) != n)
    throw DimensionError("networked: need one derivative bound per state");
  for (auto [lo, hi] : d_prime_bounds)
    if (!(lo <= hi)) throw DimensionError("networked: invalid derivative bound interval");
  for (int i = 0; i < n; ++i)
    for (VarRef var : variables_of(d[i]))
      if (var.block != VarBlock::X || var.index != i + 1)
        throw DimensionError("networked: d_" + std::to_string(i + 1) +
                             " may only depend on x" + std::to_string(i + 1));
  if (state_domain.empty()) state_domain = Box::cube(n, -1.0, 1.0);

  NetworkedModel net;
  net.name = std::move(name);
  net.W1 = std::move(W1);
  net.W2 = std::move(W2);
  net.d = std::move(d);
  net.f_act = std::move(f_act);
  net.v = std::move(v);
  net.d_prime_bounds = std::move(d_prime_bounds);
  net.jf_norm_bound = jf_norm_bound;
  net.state_domain = std::move(state_domain);
  return net;
}

Eigen::VectorXd networked_field(const NetworkedModel& net, const Eigen::VectorXd& x) {
  Env env;
  env.x = x;
  Eigen::VectorXd dval(net.n());
  for (int i = 0; i < net.n(); ++i) dval(i) = eval(net.d[i], env);
  Env fenv;
  fenv.y = net.W2 * x;
  return -dval + net.W1 * net.f_act(fenv) + net.v;
}

Eigen::MatrixXd networked_jacobian(const NetworkedModel& net, const Eigen::VectorXd& x) {
  Env env;
  env.x = x;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(net.n(), net.n());
  for (int i = 0; i < net.n(); ++i)
    D(i, i) = eval(diff(net.d[i], {VarBlock::X, i + 1}), env);
  Env fenv;
  fenv.y = net.W2 * x;
  const Eigen::MatrixXd jf = eval_matrix(jacobian(net.f_act, VarBlock::Y), fenv);
  return -D + net.W1 * jf * net.W2;
}

namespace {

// Rewrites components given in y_1..y_q as functions of y_1..y_n via the
// linear map y -> W y. The substitution must be simultaneous: replacements
// are staged through the otherwise-unused u block, then renamed back to y.
std::vector<Expr> compose_with_linear(std::vector<Expr> comps, const Eigen::MatrixXd& W) {
  const int q = static_cast<int>(W.rows());
  const int n = static_cast<int>(W.cols());
  for (auto& comp : comps) {
    for (int l = 1; l <= q; ++l) {
      Expr lin(0.0);
      for (int t = 0; t < n; ++t)
        lin = lin + Expr(W(l - 1, t)) * Expr::variable({VarBlock::U, t + 1});
      comp = substitute(comp, {VarBlock::Y, l}, lin);
    }
    for (int t = 1; t <= n; ++t)
      comp = substitute(comp, {VarBlock::U, t}, Expr::variable({VarBlock::Y, t}));
  }
  return comps;
}

}  // namespace

GlsModel networked_to_gls(const NetworkedModel& net, double gamma) {
  if (!(gamma > 0)) throw DimensionError("networked_to_gls: gamma must be positive");
  const int n = net.n();

  std::vector<Expr> f_comp;
  for (int i = 0; i < n; ++i)
    f_comp.push_back(-net.d[i] + Expr(net.v(i)) +
                     Expr(gamma) * Expr::variable({VarBlock::U, i + 1}));
  std::vector<Expr> g_comp;
  for (int i = 0; i < n; ++i) g_comp.push_back(Expr::variable({VarBlock::X, i + 1}));

  // Phi(y) = -gamma^-1 W1 f(W2 y), composed symbolically.
  std::vector<Expr> act = compose_with_linear(net.f_act.components(), net.W2);
  std::vector<Expr> phi_comp;
  for (int i = 0; i < n; ++i) {
    Expr acc(0.0);
    for (int j = 0; j < net.m_in(); ++j) acc = acc + Expr(net.W1(i, j)) * act[j];
    phi_comp.push_back(Expr(-1.0 / gamma) * acc);
  }

  return make_gls(net.name + "-gls", n, n, n,
                  VectorFunction(std::move(f_comp), n, n, 0),
                  VectorFunction(std::move(g_comp), n, 0, 0),
                  VectorFunction(std::move(phi_comp), 0, 0, n), net.state_domain);
}

// ---------------------------------------------------------------------------
// Built-in families

GlsModel builtin_lti_lurie(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& C, std::vector<Expr> phi_components,
                           Box state_domain, Box input_domain) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int p = static_cast<int>(C.rows());
  if (A.cols() != n || B.rows() != n || C.cols() != n)
    throw DimensionError("lti_lurie: inconsistent A/B/C dimensions");
  if (static_cast<int>(phi_components.size()) != m)
    throw DimensionError("lti_lurie: phi must have m components");

  std::vector<Expr> f_comp;
  for (int i = 0; i < n; ++i) {
    Expr acc(0.0);
    for (int j = 0; j < n; ++j) acc = acc + Expr(A(i, j)) * Expr::variable({VarBlock::X, j + 1});
    for (int j = 0; j < m; ++j) acc = acc + Expr(B(i, j)) * Expr::variable({VarBlock::U, j + 1});
    f_comp.push_back(acc);
  }
  std::vector<Expr> g_comp;
  for (int i = 0; i < p; ++i) {
    Expr acc(0.0);
    for (int j = 0; j < n; ++j) acc = acc + Expr(C(i, j)) * Expr::variable({VarBlock::X, j + 1});
    g_comp.push_back(acc);
  }
  return make_gls("lti-lurie", n, m, p, VectorFunction(std::move(f_comp), n, m, 0),
                  VectorFunction(std::move(g_comp), n, 0, 0),
                  VectorFunction(std::move(phi_components), 0, 0, p), std::move(state_domain),
                  std::move(input_domain));
}

GlsModel builtin_hopfield(const Eigen::MatrixXd& D, const Eigen::MatrixXd& W1,
                          const Eigen::MatrixXd& W2, std::vector<Expr> h_components,
                          Box state_domain) {
  const int n = static_cast<int>(D.rows());
  if (D.cols() != n || W1.rows() != n || W2.cols() != n)
    throw DimensionError("hopfield: inconsistent dimensions");
  const int qdim = static_cast<int>(W1.cols());
  if (static_cast<int>(h_components.size()) != qdim)
    throw DimensionError("hopfield: h must have cols(W1) components");

  std::vector<Expr> f_comp;
  for (int i = 0; i < n; ++i) {
    Expr acc = Expr::variable({VarBlock::U, i + 1});
    for (int j = 0; j < n; ++j) acc = acc - Expr(D(i, j)) * Expr::variable({VarBlock::X, j + 1});
    f_comp.push_back(acc);
  }
  std::vector<Expr> g_comp;
  for (int i = 0; i < n; ++i) g_comp.push_back(Expr::variable({VarBlock::X, i + 1}));

  std::vector<Expr> act = compose_with_linear(std::move(h_components), W2);
  std::vector<Expr> phi_comp;
  for (int i = 0; i < n; ++i) {
    Expr acc(0.0);
    for (int j = 0; j < qdim; ++j) acc = acc + Expr(W1(i, j)) * act[j];
    phi_comp.push_back(Expr(-1.0) * acc);
  }
  return make_gls("hopfield", n, n, n, VectorFunction(std::move(f_comp), n, n, 0),
                  VectorFunction(std::move(g_comp), n, 0, 0),
                  VectorFunction(std::move(phi_comp), 0, 0, n), std::move(state_domain));
}

NetworkedModel builtin_biochem(int n, std::vector<Expr> d_components, const Expr& r,
                               std::vector<std::pair<double, double>> d_prime_bounds,
                               double r_prime_bound) {
  if (n < 2) throw DimensionError("biochem: need n >= 2");
  if (static_cast<int>(d_components.size()) != n)
    throw DimensionError("biochem: need n dissipation terms");

  // f(y) = (r(y_n), y_1, ..., y_{n-1})
  std::vector<Expr> f_comp;
  f_comp.push_back(substitute(r, {VarBlock::S, 1}, Expr::variable({VarBlock::Y, n})));
  for (int i = 1; i < n; ++i) f_comp.push_back(Expr::variable({VarBlock::Y, i}));

  // ||J_f||_2 = max{|r'|, 1} on the chain structure.
  const double jf = std::max(std::abs(r_prime_bound), 1.0);

  NetworkedModel net = make_networked(
      "biochem", Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n),
      std::move(d_components), VectorFunction(std::move(f_comp), 0, 0, n),
      Eigen::VectorXd::Zero(n), std::move(d_prime_bounds), jf, Box::cube(n, 0.0, 5.0));
  net.r_prime_bound = std::abs(r_prime_bound);
  return net;
}

NetworkedModel builtin_example31(bool conservative_d1) {
  std::vector<Expr> d = {
      parse("sin(x1) + 0.5"),
      parse("3*x2"),
      parse("3*x3"),
  };
  // d1' = cos(x1): the worked analysis uses [0,1]; the literal range of cos
  // on the positive orthant is [-1,1].
  std::vector<std::pair<double, double>> bounds = {
      conservative_d1 ? std::make_pair(-1.0, 1.0) : std::make_pair(0.0, 1.0),
      {3.0, 3.0},
      {3.0, 3.0},
  };
  NetworkedModel net = builtin_biochem(3, std::move(d), parse("(1+s)/(2+s)"),
                                       std::move(bounds), 0.25);
  net.name = conservative_d1 ? "example31-conservative" : "example31";
  return net;
}

// ---------------------------------------------------------------------------
// Tridiagonal metric construction

MetricSpec tridiagonal_theta(const GlsModel& mdl, const std::vector<Eigen::VectorXd>& samples) {
  const int n = mdl.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(i - j) > 1 && !mdl.jac_fx[i][j].is_constant(0.0))
        throw DimensionError("tridiagonal_theta: df/dx has a nonzero entry at (" +
                             std::to_string(i + 1) + "," + std::to_string(j + 1) +
                             ") outside the tridiagonal band");
  if (samples.empty()) throw DimensionError("tridiagonal_theta: need sample points");

  // Sign condition: -h_{i,i+1} > 0 and h_{i+1,i} > 0 at every sample.
  for (const auto& x : samples) {
    Env env;
    env.x = x;
    env.u = Eigen::VectorXd::Zero(mdl.m);
    for (int i = 0; i + 1 < n; ++i) {
      const double upper = eval(mdl.jac_fx[i][i + 1], env);
      const double lower = eval(mdl.jac_fx[i + 1][i], env);
      if (!(-upper > 0) || !(lower > 0)) {
        std::string pt = "(";
        for (int c = 0; c < n; ++c) pt += (c ? "," : "") + std::to_string(x(c));
        pt += ")";
        throw DimensionError("tridiagonal_theta: sign condition violated at sample " + pt +
                             " for pair (" + std::to_string(i + 1) + "," +
                             std::to_string(i + 2) + ")");
      }
    }
  }

  std::vector<Expr> deltas;
  deltas.push_back(Expr(1.0));
  for (int i = 0; i + 1 < n; ++i) {
    Expr ratio = (-mdl.jac_fx[i][i + 1]) / mdl.jac_fx[i + 1][i];
    deltas.push_back(deltas.back() * Expr::unary(UnaryFn::Sqrt, ratio));
  }
  MetricSpec ms = MetricSpec::diagonal(std::move(deltas), n);
  ms.tridiagonal_auto = true;
  return ms;
}

}  // namespace kcontract
