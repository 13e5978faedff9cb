// kcontract: compound-matrix computations, k-contraction certification, and
// trajectory/volume simulation for generalized Lurie and networked systems.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "kcontract/certify.hpp"
#include "kcontract/compound.hpp"
#include "kcontract/io.hpp"
#include "kcontract/parallel.hpp"
#include "kcontract/reproduce.hpp"
#include "kcontract/rng.hpp"
#include "kcontract/sim.hpp"
#include "kcontract/svg.hpp"

namespace fs = std::filesystem;
using namespace kcontract;

namespace {

constexpr const char* kVersion = "0.1.0";

// exit codes: 0 success/certified, 2 not certified, 1 error
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotCertified = 2;

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  return buf;
}

// The manifest goes to the output directory before any result file.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config, std::uint64_t seed) {
  fs::create_directories(out_dir);
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["out"] = out_dir;
  j["seed"] = seed;
  j["version"] = kVersion;
  j["timestamp"] = timestamp();
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in '" + out_dir + "'");
  out << j.dump(2) << '\n';
}

Eigen::VectorXd parse_x0(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  if (vals.empty()) throw ConfigError("--x0 needs comma-separated values");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

int run_compound(const std::string& in_path, const std::string& mode, int k,
                 const std::string& out_path) {
  const Eigen::MatrixXd A = read_matrix_csv(in_path);
  Eigen::MatrixXd R;
  if (mode == "mult") {
    R = mult_compound(A, k);
  } else if (mode == "add") {
    R = add_compound(A, k);
  } else {
    throw ConfigError("mode must be 'mult' or 'add'");
  }
  write_matrix_csv(out_path, R);
  std::cout << "wrote " << R.rows() << "x" << R.cols() << " compound to " << out_path << "\n";
  return kExitOk;
}

int run_certify(const std::string& config_path, int k, int grid_ppa, long refine,
                std::uint64_t seed, const std::string& out_dir) {
  write_manifest(out_dir, "certify", config_path, seed);
  LoadedModel lm = load_model_config(config_path);

  Certificate cert;
  if (!lm.is_gls()) {
    const NetworkedModel& net = lm.networked();
    if (net.r_prime_bound) {
      cert = certify_biochem(*net.r_prime_bound, net.d_prime_bounds, k);
    } else {
      cert = certify_networked(net, k);
    }
  } else {
    const GlsModel& mdl = lm.gls();
    DomainGrid grid;
    grid.x_box = mdl.state_domain;
    if (!mdl.input_domain.empty()) grid.u_box = mdl.input_domain;
    grid.points_per_axis = grid_ppa;
    grid.refine = refine;
    grid.seed = seed;
    MetricSpec metric = lm.metric;
    if (lm.metric_is_tridiagonal_request) {
      const auto samples =
          grid_points(mdl.state_domain, grid_ppa, refine, seed, grid.cap);
      metric = tridiagonal_theta(mdl, samples);
    }
    cert = certify_gls(mdl, metric, k, grid);
  }

  write_certificate_json((fs::path(out_dir) / "certificate.json").string(), cert);
  std::cout << cert.summary() << "\n";
  return cert.certified ? kExitOk : kExitNotCertified;
}

int run_simulate(const std::string& config_path, const std::string& x0_text, int sample_count,
                 int volume_k, double tend, double rtol, double atol, std::uint64_t seed,
                 bool plot, const std::string& out_dir) {
  write_manifest(out_dir, "simulate", config_path, seed);
  LoadedModel lm = load_model_config(config_path);

  Field field;
  FieldJacobian jac;
  Box domain;
  if (lm.is_gls()) {
    field = field_of(lm.gls());
    jac = jacobian_of(lm.gls());
    domain = lm.gls().state_domain;
  } else {
    field = field_of(lm.networked());
    jac = jacobian_of(lm.networked());
    domain = lm.networked().state_domain;
  }

  std::vector<Eigen::VectorXd> initials;
  if (!x0_text.empty()) {
    initials.push_back(parse_x0(x0_text));
  } else {
    initials = sample_initials(domain, sample_count, seed);
  }

  SimConfig cfg;
  cfg.t_end = tend;
  cfg.rtol = rtol;
  cfg.atol = atol;
  cfg.seed = seed;

  int failures = 0;
  std::vector<PlotSeries> series;
  for (std::size_t i = 0; i < initials.size(); ++i) {
    const std::string tag = std::to_string(i + 1);
    try {
      Trajectory traj;
      if (volume_k > 0) {
        SplitMix64 rng(seed + 17 * i);
        const int n = static_cast<int>(initials[i].size());
        Eigen::MatrixXd W0(n, volume_k);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < volume_k; ++c) W0(r, c) = rng.uniform(-1.0, 1.0);
        auto [tr, trace] = integrate_with_variational(field, jac, initials[i], W0, cfg);
        traj = std::move(tr);
        write_volume_csv((fs::path(out_dir) / ("volume_" + tag + ".csv")).string(), trace);
      } else {
        traj = integrate(field, initials[i], cfg);
      }
      write_trajectory_csv((fs::path(out_dir) / ("traj_" + tag + ".csv")).string(), traj);
      auto eq = detect_equilibrium(traj, field, 1e-6);
      std::cout << "trajectory " << tag << ": " << traj.times.size() << " points";
      if (eq) {
        std::cout << ", settled at (";
        for (Eigen::Index c = 0; c < eq->size(); ++c)
          std::cout << (c ? ", " : "") << (*eq)(c);
        std::cout << ")";
      }
      std::cout << "\n";
      if (plot) {
        for (Eigen::Index c = 0; c < initials[i].size(); ++c) {
          PlotSeries s;
          s.label = "x" + std::to_string(c + 1) + " (traj " + tag + ")";
          for (std::size_t r = 0; r < traj.times.size(); ++r) {
            s.xs.push_back(traj.times[r]);
            s.ys.push_back(traj.states[r](c));
          }
          series.push_back(std::move(s));
        }
      }
    } catch (const SolverError& e) {
      // keep going: report per-trajectory failures and continue the batch
      std::cerr << "trajectory " << tag << " failed: " << e.what() << "\n";
      ++failures;
    }
  }
  if (plot && !series.empty())
    write_svg_lineplot((fs::path(out_dir) / "trajectories.svg").string(), "state components",
                       "t", "x", series);
  return failures == static_cast<int>(initials.size()) ? kExitError : kExitOk;
}

int run_reproduce(const std::string& out_dir, std::uint64_t seed, double tend) {
  write_manifest(out_dir, "reproduce-biochem", "", seed);
  const BiochemReproduction rep = run_biochem_reproduction(out_dir, seed, tend);
  std::cout << "reference bounds:    " << rep.cert_reference.summary() << "\n";
  std::cout << "conservative bounds: " << rep.cert_conservative.summary() << "\n";
  std::cout << rep.roots.size() << " equilibrium roots; " << rep.trajectories.size()
            << " trajectories";
  int converged = 0;
  for (const auto& t : rep.trajectories) converged += t.converged ? 1 : 0;
  std::cout << ", " << converged << " converged\n";
  std::cout << "report: " << (fs::path(out_dir) / "report.md").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-contraction analysis toolkit for generalized Lurie systems"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // compound
  std::string cp_in, cp_mode = "mult", cp_out = "compound_out.csv";
  int cp_k = 2;
  auto* cmd_compound = app.add_subcommand("compound", "compound of a CSV matrix");
  cmd_compound->add_option("matrix", cp_in, "input matrix CSV")->required();
  cmd_compound->add_option("--k", cp_k, "compound order")->required();
  cmd_compound->add_option("--mode", cp_mode, "mult | add");
  cmd_compound->add_option("--out", cp_out, "output CSV path");

  // certify
  std::string ct_config, ct_out = "certify_out";
  int ct_k = 2, ct_grid = 5;
  long ct_refine = 0;
  std::uint64_t ct_seed = 1;
  auto* cmd_certify = app.add_subcommand("certify", "run a certification");
  cmd_certify->add_option("config", ct_config, "model config JSON")->required();
  cmd_certify->add_option("--k", ct_k, "contraction order")->required();
  cmd_certify->add_option("--grid", ct_grid, "grid points per axis");
  cmd_certify->add_option("--refine", ct_refine, "random refinement samples");
  cmd_certify->add_option("--seed", ct_seed, "sampling seed");
  cmd_certify->add_option("--out", ct_out, "output directory");

  // simulate
  std::string sm_config, sm_x0, sm_out = "simulate_out";
  int sm_sample = 1, sm_volume = 0;
  double sm_tend = 10.0, sm_rtol = 1e-8, sm_atol = 1e-10;
  std::uint64_t sm_seed = 1;
  bool sm_plot = false;
  auto* cmd_simulate = app.add_subcommand("simulate", "integrate trajectories");
  cmd_simulate->add_option("config", sm_config, "model config JSON")->required();
  cmd_simulate->add_option("--x0", sm_x0, "initial state, comma separated");
  cmd_simulate->add_option("--sample", sm_sample, "number of sampled initial states");
  cmd_simulate->add_option("--volume", sm_volume, "track k-volume along each trajectory");
  cmd_simulate->add_option("--tend", sm_tend, "horizon");
  cmd_simulate->add_option("--rtol", sm_rtol, "relative tolerance");
  cmd_simulate->add_option("--atol", sm_atol, "absolute tolerance");
  cmd_simulate->add_option("--seed", sm_seed, "sampling seed");
  cmd_simulate->add_flag("--plot", sm_plot, "emit an SVG of the state components");
  cmd_simulate->add_option("--out", sm_out, "output directory");

  // reproduce-biochem
  std::string rp_out = "reproduce_out";
  std::uint64_t rp_seed = 42;
  double rp_tend = 200.0;
  auto* cmd_reproduce =
      app.add_subcommand("reproduce-biochem", "feedback-chain reproduction experiment");
  cmd_reproduce->add_option("--out", rp_out, "output directory");
  cmd_reproduce->add_option("--seed", rp_seed, "sampling seed");
  cmd_reproduce->add_option("--tend", rp_tend, "horizon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the error message
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (cmd_compound->parsed()) return run_compound(cp_in, cp_mode, cp_k, cp_out);
    if (cmd_certify->parsed())
      return run_certify(ct_config, ct_k, ct_grid, ct_refine, ct_seed, ct_out);
    if (cmd_simulate->parsed())
      return run_simulate(sm_config, sm_x0, sm_sample, sm_volume, sm_tend, sm_rtol, sm_atol,
                          sm_seed, sm_plot, sm_out);
    if (cmd_reproduce->parsed()) return run_reproduce(rp_out, rp_seed, rp_tend);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
