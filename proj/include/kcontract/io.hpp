#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>

#include "kcontract/certify.hpp"
#include "kcontract/model.hpp"
#include "kcontract/sim.hpp"

#include <json.hpp>

namespace kcontract {

// Comma-separated numeric matrix; one row per line, blank lines ignored.
// Format problems are reported with their line number.
Eigen::MatrixXd read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M);

// Trajectory CSV: header "t,x1,...,xn"; volume CSV: "t,logvol,weighted_logvol".
// Floats carry 17 significant digits.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
void write_volume_csv(const std::string& path, const VolumeTrace& trace);

std::string format_double(double v);  // %.17g

nlohmann::json certificate_to_json(const Certificate& cert);
void write_certificate_json(const std::string& path, const Certificate& cert);

// A model config holds either a GLS defined by expressions or a networked
// builtin, plus an optional metric request.
struct LoadedModel {
  std::variant<GlsModel, NetworkedModel> system;
  MetricSpec metric = MetricSpec::identity();
  bool metric_is_tridiagonal_request = false;  // resolve against the model later
  std::string name;

  bool is_gls() const { return std::holds_alternative<GlsModel>(system); }
  const GlsModel& gls() const { return std::get<GlsModel>(system); }
  const NetworkedModel& networked() const { return std::get<NetworkedModel>(system); }
};

LoadedModel load_model_config(const std::string& path);
LoadedModel model_from_json(const nlohmann::json& doc);

}  // namespace kcontract
