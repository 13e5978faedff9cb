#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kcontract/certify.hpp"

namespace kcontract {

// End-to-end reproduction of the 3-state feedback-chain experiment:
// certification under both derivative-bound choices for d1, the equilibrium
// root table, five seeded trajectories with their limits, and 2-volume
// traces. When out_dir is non-empty the run writes certificates, CSVs, SVG
// plots and report.md there.
struct BiochemReproduction {
  Certificate cert_reference;     // d1' in [0,1]: alpha_2 = 3/2, certified
  Certificate cert_conservative;  // d1' in [-1,1]: alpha_2 = 1, not certified
  std::vector<double> roots;      // residual roots for e3 in [0, 10]

  struct TrajectoryResult {
    Eigen::VectorXd x0;
    Eigen::VectorXd limit;
    bool converged = false;
    double field_norm = 0;    // |f(limit)|
    double e1_error = 0;      // |limit_1 - 9 limit_3|
    double e2_error = 0;      // |limit_2 - 3 limit_3|
    double root_distance = 0; // distance from limit_3 to the nearest residual root
    double logvol_start = 0;
    double logvol_end = 0;
    double tail_slope = 0;    // least-squares slope of logvol over the final half
  };
  std::vector<TrajectoryResult> trajectories;

  double t_end = 0;
  std::uint64_t seed = 0;
};

BiochemReproduction run_biochem_reproduction(const std::string& out_dir, std::uint64_t seed = 42,
                                             double t_end = 200.0);

}  // namespace kcontract
