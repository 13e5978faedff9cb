#include "kcontract/certify.hpp"

#include <cmath>
#include <sstream>

#include "kcontract/compound.hpp"
#include "kcontract/parallel.hpp"
#include "kcontract/rng.hpp"
#include "kcontract/spectral.hpp"

namespace kcontract {

std::string Certificate::summary() const {
  std::ostringstream os;
  os << (certified ? "CERTIFIED" : "not certified") << " k=" << k << " mode=" << mode;
  if (std::isfinite(eta1)) os << " eta1=" << eta1;
  if (std::isfinite(eta2)) os << " eta2=" << eta2;
  if (std::isfinite(rate)) os << " rate=" << rate;
  if (std::isfinite(alpha_k)) os << " alpha_k=" << alpha_k;
  os << " margin=" << worst_margin;
  return os.str();
}

std::vector<Eigen::VectorXd> grid_points(const Box& box, int points_per_axis, long refine,
                                         std::uint64_t seed, long cap) {
  box.validate();
  if (box.empty()) throw DimensionError("grid over an empty box");
  if (points_per_axis < 1) throw DimensionError("points_per_axis must be >= 1");
  const int n = box.dim();

  double total = 1;
  for (int i = 0; i < n; ++i) total *= points_per_axis;
  if (total + static_cast<double>(refine) > static_cast<double>(cap))
    throw DimensionError("grid cap exceeded: " + std::to_string(total + refine) + " > " +
                         std::to_string(cap));

  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(total) + refine);
  std::vector<int> idx(n, 0);
  for (;;) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) {
      x(i) = points_per_axis == 1
                 ? 0.5 * (box.low(i) + box.high(i))
                 : box.low(i) + (box.high(i) - box.low(i)) * idx[i] / (points_per_axis - 1);
    }
    pts.push_back(std::move(x));
    int c = n - 1;
    while (c >= 0 && ++idx[c] == points_per_axis) idx[c--] = 0;
    if (c < 0) break;
  }
  SplitMix64 rng(seed);
  for (long r = 0; r < refine; ++r) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = rng.uniform(box.low(i), box.high(i));
    pts.push_back(std::move(x));
  }
  return pts;
}

Eigen::MatrixXd h_matrix(const GlsModel& mdl, const MetricSpec& metric, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u) {
  const ThetaEval te = theta_eval_ol(metric, mdl, x, u);
  const GlsBlocks blocks = eval_blocks(mdl, x, u);
  const Eigen::MatrixXd jol =
      te.theta * blocks.fx * te.theta_inv + te.theta_dot * te.theta_inv;
  const Eigen::MatrixXd tb = te.theta * blocks.fu;                 // Theta df/du
  const Eigen::MatrixXd tc = blocks.gx * te.theta_inv;             // dg/dx Theta^-1
  Eigen::MatrixXd H = jol + jol.transpose() + tb * tb.transpose() + tc.transpose() * tc;
  return 0.5 * (H + H.transpose());  // kill rounding asymmetry
}

namespace {

struct SampleSet {
  std::vector<Eigen::VectorXd> xs;
  // For each x, the inputs at which the (x,u)-quantified conditions are
  // evaluated. Always contains the closed-loop input; u-box samples follow.
  std::vector<std::vector<Eigen::VectorXd>> us;
  long total = 0;
  std::string shape;
};

SampleSet build_samples(const GlsModel& mdl, const DomainGrid& grid) {
  SampleSet s;
  s.xs = grid_points(grid.x_box.empty() ? mdl.state_domain : grid.x_box, grid.points_per_axis,
                     grid.refine, grid.seed, grid.cap);
  std::vector<Eigen::VectorXd> ubox_pts;
  std::optional<Box> ubox = grid.u_box;
  if (!ubox && !mdl.input_domain.empty()) ubox = mdl.input_domain;
  if (ubox) ubox_pts = grid_points(*ubox, grid.points_per_axis, grid.refine, grid.seed + 1,
                                   grid.cap);

  const double total =
      static_cast<double>(s.xs.size()) * (1.0 + static_cast<double>(ubox_pts.size()));
  if (total > static_cast<double>(grid.cap))
    throw DimensionError("grid cap exceeded over the (x,u) product");

  s.us.resize(s.xs.size());
  for (std::size_t i = 0; i < s.xs.size(); ++i) {
    s.us[i].push_back(closed_loop_input(mdl, s.xs[i]));
    for (const auto& u : ubox_pts) s.us[i].push_back(u);
    s.total += static_cast<long>(s.us[i].size());
  }
  std::ostringstream shape;
  shape << s.xs.size() << " x-points x " << (1 + ubox_pts.size()) << " u-points";
  s.shape = shape.str();
  return s;
}

struct ConditionScan {
  double max_h = -std::numeric_limits<double>::infinity();    // max top-k sum of H
  double max_b = -std::numeric_limits<double>::infinity();    // max top-k sum, B-side
  double max_c = -std::numeric_limits<double>::infinity();    // max top-k sum, C-side
  double conclusion_max = -std::numeric_limits<double>::infinity();  // max top-k sum of sym Jcl~
  Eigen::VectorXd argmax_x, argmax_u;
};

ConditionScan scan_conditions(const GlsModel& mdl, const MetricSpec& metric, int k,
                         const SampleSet& samples) {
  const int n = mdl.n;
  if (k < 1 || k > n) throw DimensionError("certify: k outside [1,n]");

  std::vector<ConditionScan> partial(samples.xs.size());
  parallel_for(samples.xs.size(), [&](std::size_t i) {
    ConditionScan local;
    const Eigen::VectorXd& x = samples.xs[i];
    for (const Eigen::VectorXd& u : samples.us[i]) {
      const ThetaEval te = theta_eval_ol(metric, mdl, x, u);
      const GlsBlocks blocks = eval_blocks(mdl, x, u);
      const Eigen::MatrixXd jol =
          te.theta * blocks.fx * te.theta_inv + te.theta_dot * te.theta_inv;
      const Eigen::MatrixXd tb = te.theta * blocks.fu;
      const Eigen::MatrixXd tc = blocks.gx * te.theta_inv;
      Eigen::MatrixXd H = jol + jol.transpose() + tb * tb.transpose() + tc.transpose() * tc;
      H = 0.5 * (H + H.transpose());
      const double sh = top_k_eig_sum(H, k);
      if (sh > local.max_h) {
        local.max_h = sh;
        local.argmax_x = x;
        local.argmax_u = u;
      }
      const Eigen::MatrixXd jphi = blocks.phiy;
      Eigen::MatrixXd mb =
          tb * (jphi * jphi.transpose() - Eigen::MatrixXd::Identity(mdl.m, mdl.m)) *
          tb.transpose();
      mb = 0.5 * (mb + mb.transpose());
      local.max_b = std::max(local.max_b, top_k_eig_sum(mb, k));
      Eigen::MatrixXd mc =
          tc.transpose() * (jphi.transpose() * jphi - Eigen::MatrixXd::Identity(mdl.p, mdl.p)) *
          tc;
      mc = 0.5 * (mc + mc.transpose());
      local.max_c = std::max(local.max_c, top_k_eig_sum(mc, k));
    }
    const Eigen::MatrixXd jcl = riemannian_jacobian_cl(mdl, metric, x);
    local.conclusion_max =
        std::max(local.conclusion_max, top_k_eig_sum(jcl + jcl.transpose(), k));
    partial[i] = std::move(local);
  });

  ConditionScan out;
  for (auto& loc : partial) {
    if (loc.max_h > out.max_h) {
      out.max_h = loc.max_h;
      out.argmax_x = loc.argmax_x;
      out.argmax_u = loc.argmax_u;
    }
    out.max_b = std::max(out.max_b, loc.max_b);
    out.max_c = std::max(out.max_c, loc.max_c);
    out.conclusion_max = std::max(out.conclusion_max, loc.conclusion_max);
  }
  return out;
}

}  // namespace

Certificate certify_gls(const GlsModel& mdl, MetricSpec metric, int k, const DomainGrid& grid) {
  const SampleSet samples = build_samples(mdl, grid);
  estimate_metric_bounds(metric, mdl.n, samples.xs);
  const ConditionScan scan = scan_conditions(mdl, metric, k, samples);

  Certificate cert;
  cert.k = k;
  cert.eta1 = -scan.max_h;
  const double eta2_b = -scan.max_b;
  const double eta2_c = -scan.max_c;
  if (eta2_b >= eta2_c) {
    cert.eta2 = eta2_b;
    cert.mode = "thm1-B";
  } else {
    cert.eta2 = eta2_c;
    cert.mode = "thm1-C";
  }
  cert.rate = (cert.eta1 + cert.eta2) / 2;
  cert.certified = cert.eta1 + cert.eta2 > kStrictSlack;
  cert.worst_margin = cert.eta1 + cert.eta2;
  cert.argmin_x = scan.argmax_x;
  cert.argmin_u = scan.argmax_u;
  cert.sigma1 = metric.sigma1;
  cert.sigma2 = metric.sigma2;
  cert.samples = samples.total;
  cert.seed = grid.seed;
  cert.grid_shape = samples.shape;
  cert.metric_description = metric.describe();
  cert.conclusion_margin = -(cert.eta1 + cert.eta2) - scan.conclusion_max;
  return cert;
}

// ---------------------------------------------------------------------------
// Constant-metric certificates

namespace {

// Symmetric positive-definite square root via the spectral decomposition.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()));
  if (es.info() != Eigen::Success) throw Error("eigendecomposition of P failed");
  if (es.eigenvalues().minCoeff() <= 0)
    throw DimensionError("P must be symmetric positive definite");
  return es.operatorSqrt();
}

}  // namespace

Certificate ari_constant_theta(const GlsModel& mdl, const Eigen::MatrixXd& P, int k,
                               const DomainGrid& grid) {
  if (P.rows() != mdl.n || P.cols() != mdl.n) throw DimensionError("P must be n x n");
  const Eigen::MatrixXd theta = spd_sqrt(P);
  const MetricSpec metric = MetricSpec::constant(theta);
  const Eigen::MatrixXd theta_inv =
      theta.partialPivLu().solve(Eigen::MatrixXd::Identity(mdl.n, mdl.n));

  const SampleSet samples = build_samples(mdl, grid);
  const Eigen::MatrixXd Pk = mult_compound(P, k);
  const Eigen::MatrixXd thetak = mult_compound(theta, k);

  // Left-hand sides of the Riccati-type inequality, one per sample.
  std::vector<Eigen::MatrixXd> lhs;
  for (std::size_t i = 0; i < samples.xs.size(); ++i) {
    const Eigen::VectorXd& x = samples.xs[i];
    for (const Eigen::VectorXd& u : samples.us[i]) {
      const GlsBlocks blocks = eval_blocks(mdl, x, u);
      const Eigen::MatrixXd fxk = add_compound(blocks.fx, k);
      const Eigen::MatrixXd tb = theta * blocks.fu;
      const Eigen::MatrixXd tc = blocks.gx * theta_inv;
      const Eigen::MatrixXd mid =
          add_compound(tb * tb.transpose() + tc.transpose() * tc, k);
      Eigen::MatrixXd M = Pk * fxk + fxk.transpose() * Pk +
                          thetak.transpose() * mid * thetak;
      lhs.push_back(0.5 * (M + M.transpose()));
    }
  }

  const auto feasible = [&](double eta1) {
    for (const auto& M : lhs)
      if (sym_eigs_desc(M + eta1 * Pk)(0) > 0) return false;
    return true;
  };

  // Bracket the maximal feasible eta1, then bisect.
  double lo = -1, hi = 1;
  while (!feasible(lo)) {
    lo *= 2;
    if (lo < -1e12) throw Error("ARI bisection failed to bracket from below");
  }
  while (feasible(hi)) {
    hi *= 2;
    if (hi > 1e12) throw Error("ARI bisection failed to bracket from above");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-9 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }

  Certificate cert = certify_gls(mdl, metric, k, grid);
  cert.mode = "ari";
  // Keep the eigenvalue-form eta2/conclusion data; replace eta1 by the
  // ARI-form maximum (the two agree by congruence, asserted in tests).
  cert.eta1 = lo;
  cert.rate = (cert.eta1 + cert.eta2) / 2;
  cert.certified = cert.eta1 + cert.eta2 > kStrictSlack;
  cert.worst_margin = cert.eta1 + cert.eta2;
  return cert;
}

Certificate certify_lti_lurie(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const Eigen::MatrixXd& C, const VectorFunction& phi,
                              const Eigen::MatrixXd& P, int k, const Box& y_box,
                              int y_points_per_axis, long y_refine, std::uint64_t seed) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int p = static_cast<int>(C.rows());
  if (A.cols() != n || B.rows() != n || C.cols() != n)
    throw DimensionError("lti: inconsistent A/B/C dimensions");
  if (phi.out_dim() != m || phi.arity(VarBlock::Y) != p)
    throw DimensionError("lti: phi must map R^p -> R^m");
  if (k < 1 || k > n) throw DimensionError("lti: k outside [1,n]");

  const Eigen::MatrixXd theta = spd_sqrt(P);
  const Eigen::MatrixXd theta_inv =
      theta.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));

  // State-independent eta1 part.
  Eigen::MatrixXd H = theta * A * theta_inv + theta_inv * A.transpose() * theta +
                      theta * B * B.transpose() * theta +
                      theta_inv * C.transpose() * C * theta_inv;
  H = 0.5 * (H + H.transpose());
  const double eta1 = -top_k_eig_sum(H, k);

  // Check the compound Riccati form of the same condition at eta1.
  {
    const Eigen::MatrixXd Ak = add_compound(A, k);
    const Eigen::MatrixXd Pk = mult_compound(P, k);
    const Eigen::MatrixXd thetak = mult_compound(theta, k);
    const Eigen::MatrixXd mid = add_compound(
        theta * B * B.transpose() * theta + theta_inv * C.transpose() * C * theta_inv, k);
    Eigen::MatrixXd M = Pk * Ak + Ak.transpose() * Pk + thetak * mid * thetak + eta1 * Pk;
    M = 0.5 * (M + M.transpose());
    const double viol = sym_eigs_desc(M)(0);
    if (viol > 1e-6 * std::max(1.0, Pk.norm()))
      throw Error("LTI compound Riccati form inconsistent with the eigenvalue form");
  }

  const ExprMatrix jphi_sym = jacobian(phi, VarBlock::Y);
  const std::vector<Eigen::VectorXd> ys =
      grid_points(y_box, y_points_per_axis, y_refine, seed, 1000000);
  double max_b = -std::numeric_limits<double>::infinity();
  double max_c = -std::numeric_limits<double>::infinity();
  for (const auto& y : ys) {
    Env env;
    env.y = y;
    const Eigen::MatrixXd jphi = eval_matrix(jphi_sym, env);
    Eigen::MatrixXd mb = theta * B *
                         (jphi * jphi.transpose() - Eigen::MatrixXd::Identity(m, m)) *
                         B.transpose() * theta;
    mb = 0.5 * (mb + mb.transpose());
    max_b = std::max(max_b, top_k_eig_sum(mb, k));
    Eigen::MatrixXd mc = theta_inv * C.transpose() *
                         (jphi.transpose() * jphi - Eigen::MatrixXd::Identity(p, p)) * C *
                         theta_inv;
    mc = 0.5 * (mc + mc.transpose());
    max_c = std::max(max_c, top_k_eig_sum(mc, k));
  }

  Certificate cert;
  cert.k = k;
  cert.eta1 = eta1;
  cert.mode = "lti";
  cert.eta2 = std::max(-max_b, -max_c);
  cert.rate = (cert.eta1 + cert.eta2) / 2;
  cert.certified = cert.eta1 + cert.eta2 > kStrictSlack;
  cert.worst_margin = cert.eta1 + cert.eta2;
  cert.samples = static_cast<long>(ys.size());
  cert.seed = seed;
  cert.grid_shape = std::to_string(ys.size()) + " y-points";
  const Eigen::VectorXd pev = sym_eigs_desc(P);
  cert.sigma1 = pev(pev.size() - 1);
  cert.sigma2 = pev(0);
  cert.metric_description = "constant (Theta = sqrt(P))";
  return cert;
}

// ---------------------------------------------------------------------------
// Networked small-gain certificates

double alpha_k_from_bounds(const std::vector<std::pair<double, double>>& d_prime_bounds, int k) {
  const int n = static_cast<int>(d_prime_bounds.size());
  if (k < 1 || k > n) throw DimensionError("alpha_k: k outside [1,n]");
  std::vector<double> lows;
  lows.reserve(n);
  for (auto [lo, hi] : d_prime_bounds) {
    if (!(lo <= hi)) throw DimensionError("alpha_k: invalid interval");
    lows.push_back(lo);
  }
  std::sort(lows.begin(), lows.end());
  double sum = 0;
  for (int i = 0; i < k; ++i) sum += lows[i];
  return sum / k;
}

Certificate certify_networked(const NetworkedModel& net, int k) {
  if (net.d_prime_bounds.empty())
    throw DimensionError("certify_networked: derivative bounds are required");
  if (!std::isfinite(net.jf_norm_bound))
    throw DimensionError("certify_networked: jf_norm_bound is required");
  const int n = net.n();
  if (k < 1 || k > n) throw DimensionError("certify_networked: k outside [1,n]");

  Certificate cert;
  cert.k = k;
  cert.mode = "networked";
  cert.metric_description = "scalar";
  cert.samples = 0;

  const double alpha = alpha_k_from_bounds(net.d_prime_bounds, k);
  cert.alpha_k = alpha;

  const Eigen::VectorXd s1 = singular_values_desc(net.W1);
  const Eigen::VectorXd s2 = singular_values_desc(net.W2);
  const int terms = static_cast<int>(std::min<Eigen::Index>(k, std::min(s1.size(), s2.size())));
  double sum = 0;
  for (int i = 0; i < terms; ++i) sum += s1(i) * s1(i) * s2(i) * s2(i);
  const double lhs = net.jf_norm_bound * net.jf_norm_bound * sum;
  const double rhs = alpha * alpha * k;
  cert.smallgain_lhs = lhs;
  cert.smallgain_rhs = rhs;
  cert.worst_margin = std::min(alpha, rhs - lhs);
  cert.certified = alpha > kStrictSlack && rhs - lhs > kStrictSlack;
  if (!cert.certified) return cert;

  // Any gamma with gamma_lo < gamma < alpha_k works; center the margin
  // geometrically (arithmetically when the lower extreme is zero).
  const double gamma_lo = std::sqrt(lhs / k);
  const double gamma = gamma_lo > 0 ? std::sqrt(gamma_lo * alpha) : 0.5 * alpha;
  cert.gamma = gamma;
  cert.metric_p = alpha / (gamma * gamma);
  cert.eta1 = (alpha * alpha - gamma * gamma) / alpha;
  // eta2 from the simplified C-side condition with Theta = sqrt(p) I:
  // p^-1 (k - sum sigma_i^2(JPhi)) >= p^-1 (k - lhs/gamma^2).
  cert.eta2 = (k * gamma * gamma - lhs) / alpha;
  cert.rate = (cert.eta1 + cert.eta2) / 2;
  cert.sigma1 = cert.metric_p;  // Theta^T Theta = p I
  cert.sigma2 = cert.metric_p;
  return cert;
}

Certificate certify_biochem(double r_prime_bound,
                            const std::vector<std::pair<double, double>>& d_prime_bounds,
                            int k) {
  const int n = static_cast<int>(d_prime_bounds.size());
  if (k < 1 || k > n) throw DimensionError("certify_biochem: k outside [1,n]");
  const double alpha = alpha_k_from_bounds(d_prime_bounds, k);
  const double r2 = r_prime_bound * r_prime_bound;

  Certificate cert;
  cert.k = k;
  cert.mode = "biochem";
  cert.metric_description = "scalar";
  cert.alpha_k = alpha;
  cert.worst_margin = std::min(alpha - 1.0, alpha * alpha - r2);
  cert.certified = alpha - 1.0 > kStrictSlack && alpha * alpha - r2 > kStrictSlack;
  cert.smallgain_lhs = std::max(r2, 1.0) * k;
  cert.smallgain_rhs = alpha * alpha * k;
  if (!cert.certified) return cert;

  // Rate data via the underlying networked reduction (W1 = W2 = I,
  // ||J_f|| = max{|r'|, 1}).
  const double jf2 = std::max(r2, 1.0);
  const double lhs = jf2 * k;
  const double gamma_lo = std::sqrt(lhs / k);
  const double gamma = gamma_lo > 0 ? std::sqrt(gamma_lo * alpha) : 0.5 * alpha;
  cert.gamma = gamma;
  cert.metric_p = alpha / (gamma * gamma);
  cert.eta1 = (alpha * alpha - gamma * gamma) / alpha;
  cert.eta2 = (k * gamma * gamma - lhs) / alpha;
  cert.rate = (cert.eta1 + cert.eta2) / 2;
  cert.sigma1 = cert.metric_p;
  cert.sigma2 = cert.metric_p;
  return cert;
}

Escalation monotone_escalate(const NetworkedModel& net, int k_from) {
  const int n = net.n();
  if (k_from < 1 || k_from > n) throw DimensionError("monotone_escalate: k outside [1,n]");
  Escalation esc;
  for (int k = k_from; k <= n; ++k) {
    Certificate c = certify_networked(net, k);
    const bool found = c.certified;
    esc.per_k.push_back(std::move(c));
    if (found) {
      esc.k_star = k;
      // The condition is monotone in k; verify the remaining orders anyway.
      for (int j = k + 1; j <= n; ++j) {
        Certificate cj = certify_networked(net, j);
        if (!cj.certified)
          throw Error("monotonicity violated: certified at k=" + std::to_string(k) +
                      " but not at k=" + std::to_string(j));
        esc.per_k.push_back(std::move(cj));
      }
      break;
    }
  }
  return esc;
}

}  // namespace kcontract
