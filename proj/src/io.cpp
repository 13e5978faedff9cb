#include "kcontract/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kcontract {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip whitespace-only lines
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    long col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        row.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": column " +
                          std::to_string(col) + ": invalid number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(rows.front().size()) + " columns, found " +
                        std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": empty matrix");
  Eigen::MatrixXd M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  return M;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << format_double(M(i, j));
    }
    out << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
  out << 't';
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x" << i;
  out << '\n';
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    out << format_double(traj.times[r]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(traj.states[r](i));
    out << '\n';
  }
}

void write_volume_csv(const std::string& path, const VolumeTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "t,logvol,weighted_logvol\n";
  for (std::size_t r = 0; r < trace.times.size(); ++r)
    out << format_double(trace.times[r]) << ',' << format_double(trace.logvol[r]) << ','
        << format_double(trace.weighted_logvol[r]) << '\n';
}

namespace {

nlohmann::json maybe(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

nlohmann::json certificate_to_json(const Certificate& cert) {
  nlohmann::json j;
  j["k"] = cert.k;
  j["eta1"] = maybe(cert.eta1);
  j["eta2"] = maybe(cert.eta2);
  j["rate"] = maybe(cert.rate);
  j["verdict"] = cert.certified ? "certified" : "not-certified";
  j["mode"] = cert.mode;
  j["worst_margin"] = maybe(cert.worst_margin);
  nlohmann::json arg = nlohmann::json::array();
  for (Eigen::Index i = 0; i < cert.argmin_x.size(); ++i) arg.push_back(cert.argmin_x(i));
  for (Eigen::Index i = 0; i < cert.argmin_u.size(); ++i) arg.push_back(cert.argmin_u(i));
  j["argmin_point"] = arg;
  j["sigma1"] = maybe(cert.sigma1);
  j["sigma2"] = maybe(cert.sigma2);
  j["samples"] = cert.samples;
  j["seed"] = cert.seed;
  j["grid_shape"] = cert.grid_shape;
  j["metric"] = cert.metric_description;
  if (std::isfinite(cert.conclusion_margin)) j["conclusion_margin"] = cert.conclusion_margin;
  if (std::isfinite(cert.alpha_k)) j["alpha_k"] = cert.alpha_k;
  if (std::isfinite(cert.gamma)) j["gamma"] = cert.gamma;
  if (std::isfinite(cert.metric_p)) j["metric_p"] = cert.metric_p;
  if (std::isfinite(cert.smallgain_lhs)) {
    j["smallgain_lhs"] = cert.smallgain_lhs;
    j["smallgain_rhs"] = cert.smallgain_rhs;
  }
  return j;
}

void write_certificate_json(const std::string& path, const Certificate& cert) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << certificate_to_json(cert).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Model configs

namespace {

Eigen::VectorXd vec_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must hold numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a non-empty 2D array");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd M(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ConfigError(what + " rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
  }
  return M;
}

std::vector<std::string> strings_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of expression strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ConfigError(what + " must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Box box_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.contains("low") || !j.contains("high"))
    throw ConfigError(what + " needs 'low' and 'high'");
  Box b;
  b.low = vec_from_json(j["low"], what + ".low");
  b.high = vec_from_json(j["high"], what + ".high");
  b.validate();
  return b;
}

std::vector<std::pair<double, double>> bounds_from_json(const nlohmann::json& j,
                                                        const std::string& what) {
  std::vector<std::pair<double, double>> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) throw ConfigError(what + " must hold [lo,hi] pairs");
    out.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return out;
}

MetricSpec metric_from_json(const nlohmann::json& j, bool& tridiagonal_request) {
  const std::string kind = j.value("kind", "identity");
  if (kind == "identity") return MetricSpec::identity();
  if (kind == "scalar") return MetricSpec::scalar(j.value("q", 1.0));
  if (kind == "constant") return MetricSpec::constant(mat_from_json(j.at("theta"), "metric.theta"));
  if (kind == "diagonal") {
    const auto texts = strings_from_json(j.at("deltas"), "metric.deltas");
    std::vector<Expr> deltas;
    for (const auto& t : texts) deltas.push_back(parse(t));
    return MetricSpec::diagonal(std::move(deltas), static_cast<int>(deltas.size()));
  }
  if (kind == "tridiagonal-auto") {
    tridiagonal_request = true;
    return MetricSpec::identity();  // placeholder until resolved against the model
  }
  throw ConfigError("unknown metric kind '" + kind + "'");
}

LoadedModel builtin_from_json(const nlohmann::json& doc) {
  const std::string name = doc.at("builtin").get<std::string>();
  const nlohmann::json params = doc.value("params", nlohmann::json::object());
  LoadedModel lm;
  lm.name = name;
  if (name == "example31") {
    const std::string d1 = params.value("d1_bound", "reference");
    if (d1 != "reference" && d1 != "conservative")
      throw ConfigError("example31: d1_bound must be 'reference' or 'conservative'");
    lm.system = builtin_example31(d1 == "conservative");
    return lm;
  }
  if (name == "biochem") {
    const int n = params.at("n").get<int>();
    const auto d_texts = strings_from_json(params.at("d"), "params.d");
    if (static_cast<int>(d_texts.size()) != n) throw ConfigError("biochem: need n entries in d");
    std::vector<Expr> d;
    for (const auto& t : d_texts) d.push_back(parse(t));
    lm.system = builtin_biochem(n, std::move(d), parse(params.at("r").get<std::string>()),
                                bounds_from_json(params.at("d_prime_bounds"),
                                                 "params.d_prime_bounds"),
                                params.at("r_prime_bound").get<double>());
    return lm;
  }
  if (name == "networked") {
    const Eigen::MatrixXd W1 = mat_from_json(params.at("W1"), "params.W1");
    const Eigen::MatrixXd W2 = mat_from_json(params.at("W2"), "params.W2");
    const auto d_texts = strings_from_json(params.at("d"), "params.d");
    std::vector<Expr> d;
    for (const auto& t : d_texts) d.push_back(parse(t));
    const auto f_texts = strings_from_json(params.at("f"), "params.f");
    std::vector<Expr> f;
    for (const auto& t : f_texts) f.push_back(parse(t));
    Eigen::VectorXd v = params.contains("v") ? vec_from_json(params["v"], "params.v")
                                             : Eigen::VectorXd::Zero(W1.rows());
    Box domain;
    if (params.contains("state_domain")) domain = box_from_json(params["state_domain"],
                                                                "state_domain");
    lm.system = make_networked(
        "networked", W1, W2, std::move(d),
        VectorFunction(std::move(f), 0, 0, static_cast<int>(W2.rows())), std::move(v),
        params.contains("d_prime_bounds")
            ? bounds_from_json(params["d_prime_bounds"], "params.d_prime_bounds")
            : std::vector<std::pair<double, double>>{},
        params.value("jf_norm_bound", std::numeric_limits<double>::quiet_NaN()),
        std::move(domain));
    return lm;
  }
  if (name == "lti_lurie") {
    const Eigen::MatrixXd A = mat_from_json(params.at("A"), "params.A");
    const Eigen::MatrixXd B = mat_from_json(params.at("B"), "params.B");
    const Eigen::MatrixXd C = mat_from_json(params.at("C"), "params.C");
    const auto phi_texts = strings_from_json(params.at("phi"), "params.phi");
    std::vector<Expr> phi = parse_components(
        phi_texts, C.rows() == 1 ? std::optional<VarRef>(VarRef{VarBlock::Y, 1}) : std::nullopt);
    Box sd, id;
    if (params.contains("state_domain")) sd = box_from_json(params["state_domain"],
                                                            "state_domain");
    if (params.contains("input_domain")) id = box_from_json(params["input_domain"],
                                                            "input_domain");
    lm.system = builtin_lti_lurie(A, B, C, std::move(phi), std::move(sd), std::move(id));
    return lm;
  }
  if (name == "hopfield") {
    const Eigen::MatrixXd D = mat_from_json(params.at("D"), "params.D");
    const Eigen::MatrixXd W1 = mat_from_json(params.at("W1"), "params.W1");
    const Eigen::MatrixXd W2 = mat_from_json(params.at("W2"), "params.W2");
    const auto h_texts = strings_from_json(params.at("h"), "params.h");
    std::vector<Expr> h = parse_components(
        h_texts, W2.rows() == 1 ? std::optional<VarRef>(VarRef{VarBlock::Y, 1}) : std::nullopt);
    Box sd;
    if (params.contains("state_domain")) sd = box_from_json(params["state_domain"],
                                                            "state_domain");
    lm.system = builtin_hopfield(D, W1, W2, std::move(h), std::move(sd));
    return lm;
  }
  throw ConfigError("unknown builtin '" + name + "'");
}

}  // namespace

LoadedModel model_from_json(const nlohmann::json& doc) {
  LoadedModel lm;
  if (doc.contains("builtin")) {
    lm = builtin_from_json(doc);
  } else {
    const int n = doc.at("n").get<int>();
    const int m = doc.at("m").get<int>();
    const int p = doc.at("p").get<int>();
    const auto f_texts = strings_from_json(doc.at("f"), "f");
    const auto g_texts = strings_from_json(doc.at("g"), "g");
    const auto phi_texts = strings_from_json(doc.at("phi"), "phi");
    std::vector<Expr> f = parse_components(f_texts, std::nullopt);
    std::vector<Expr> g = parse_components(g_texts, std::nullopt);
    std::vector<Expr> phi = parse_components(
        phi_texts, p == 1 ? std::optional<VarRef>(VarRef{VarBlock::Y, 1}) : std::nullopt);
    Box sd, id;
    if (doc.contains("state_domain")) sd = box_from_json(doc["state_domain"], "state_domain");
    if (doc.contains("input_domain")) id = box_from_json(doc["input_domain"], "input_domain");
    lm.system = make_gls(doc.value("name", "model"), n, m, p, VectorFunction(std::move(f), n, m, 0),
                         VectorFunction(std::move(g), n, 0, 0),
                         VectorFunction(std::move(phi), 0, 0, p), std::move(sd), std::move(id));
    lm.name = doc.value("name", "model");
  }
  if (doc.contains("metric"))
    lm.metric = metric_from_json(doc["metric"], lm.metric_is_tridiagonal_request);
  return lm;
}

LoadedModel load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": JSON parse error: " + e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace kcontract
