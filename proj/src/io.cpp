#include "cliquesynth/io.hpp"

#include <cmath>
#include <fstream>

namespace cliquesynth {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw InputError(where + ": missing \"" + key + "\"");
  }
  return j.at(key);
}

std::vector<int> int_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + " must be an array");
  std::vector<int> out;
  for (const json& v : j) {
    if (!v.is_number_integer()) throw InputError(what + " must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

void check_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                 const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InputError("plant." + what + " has shape " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what,
                                 Eigen::Index cols_if_empty) {
  if (!j.is_array()) throw InputError(what + " must be an array of rows");
  if (j.empty()) return Eigen::MatrixXd(0, cols_if_empty);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& row = j[i];
    if (!row.is_array() || row.size() != cols) {
      throw InputError(what + " has ragged or malformed rows");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) throw InputError(what + " has a non-numeric entry");
      m(i, k) = row[k].get<double>();
    }
  }
  return m;
}

json instance_to_json(const Instance& inst) {
  json edges = json::array();
  for (const auto& [a, b] : inst.graph.edges()) edges.push_back({a + 1, b + 1});
  json positions = json::array();
  for (const Eigen::Vector2d& p : inst.positions) positions.push_back({p.x(), p.y()});
  json graph = {{"n", inst.graph.node_count()}, {"edges", edges}};
  if (!inst.positions.empty()) graph["positions"] = positions;
  const Plant& p = inst.plant;
  return {
      {"structure",
       {{"n_sizes", inst.structure.n_sizes}, {"m_sizes", inst.structure.m_sizes}}},
      {"graph", graph},
      {"plant",
       {{"A", matrix_to_json(p.A)},
        {"B", matrix_to_json(p.B)},
        {"Bv", matrix_to_json(p.Bv)},
        {"C", matrix_to_json(p.C)},
        {"D", matrix_to_json(p.D)},
        {"Dw", matrix_to_json(p.Dw)}}}};
}

Instance instance_from_json(const json& j) {
  Instance inst;
  const json& st = require(j, "structure", "instance");
  inst.structure.n_sizes = int_list(require(st, "n_sizes", "structure"), "n_sizes");
  inst.structure.m_sizes = int_list(require(st, "m_sizes", "structure"), "m_sizes");
  try {
    inst.structure.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  const json& g = require(j, "graph", "instance");
  const json& nj = require(g, "n", "graph");
  if (!nj.is_number_integer()) throw InputError("graph.n must be an integer");
  const int n = nj.get<int>();
  if (n != inst.structure.nodes()) {
    throw InputError("graph.n does not match the number of blocks");
  }
  std::vector<std::pair<int, int>> edges;
  const json& ej = require(g, "edges", "graph");
  if (!ej.is_array()) throw InputError("graph.edges must be an array");
  for (const json& e : ej) {
    const std::vector<int> ab = int_list(e, "graph.edges entry");
    if (ab.size() != 2 || ab[0] < 1 || ab[1] < 1 || ab[0] > n || ab[1] > n ||
        ab[0] == ab[1]) {
      throw InputError("graph.edges entries must be pairs of distinct 1-based nodes");
    }
    edges.emplace_back(ab[0] - 1, ab[1] - 1);
  }
  inst.graph = Graph(n, edges);
  if (g.contains("positions")) {
    const Eigen::MatrixXd pos = matrix_from_json(g.at("positions"), "graph.positions", 2);
    if (pos.rows() != n || pos.cols() != 2) {
      throw InputError("graph.positions must be n rows of [x, y]");
    }
    for (int i = 0; i < n; ++i) inst.positions.emplace_back(pos(i, 0), pos(i, 1));
  }

  const json& pj = require(j, "plant", "instance");
  const int nx = inst.structure.n();
  const int nu = inst.structure.m();
  Plant& p = inst.plant;
  p.A = matrix_from_json(require(pj, "A", "plant"), "plant.A");
  p.B = matrix_from_json(require(pj, "B", "plant"), "plant.B");
  check_shape(p.A, nx, nx, "A");
  check_shape(p.B, nx, nu, "B");
  const auto optional_matrix = [&](const char* key, Eigen::Index rows,
                                   Eigen::Index cols) -> Eigen::MatrixXd {
    if (!pj.contains(key) || pj[key].empty()) return Eigen::MatrixXd::Zero(rows, cols);
    return matrix_from_json(pj[key], std::string("plant.") + key, cols);
  };
  const bool has_bv = pj.contains("Bv") && !pj["Bv"].empty();
  p.Bv = has_bv ? matrix_from_json(pj["Bv"], "plant.Bv") : Eigen::MatrixXd(nx, 0);
  const Eigen::Index mv = p.Bv.cols();
  const bool has_c = pj.contains("C") && !pj["C"].empty();
  p.C = has_c ? matrix_from_json(pj["C"], "plant.C") : Eigen::MatrixXd(0, nx);
  const Eigen::Index l = p.C.rows();
  p.D = optional_matrix("D", l, nu);
  p.Dw = optional_matrix("Dw", l, mv);
  check_shape(p.Bv, nx, mv, "Bv");
  check_shape(p.C, l, nx, "C");
  check_shape(p.D, l, nu, "D");
  check_shape(p.Dw, l, mv, "Dw");
  if (!p.A.allFinite() || !p.B.allFinite() || !p.Bv.allFinite() ||
      !p.C.allFinite() || !p.D.allFinite() || !p.Dw.allFinite()) {
    throw InputError("plant matrices must be finite");
  }
  return inst;
}

json certification_to_json(const Certification& c) {
  return {{"passed", c.passed()},
          {"pattern_ok", c.pattern_ok},
          {"off_pattern_max", c.off_pattern},
          {"spectral_radius", c.spectral_radius},
          {"schur", c.schur},
          {"lyapunov_ok", c.lyapunov_ok},
          {"lyapunov_residual", c.lyapunov_residual},
          {"gamma_claimed", optional_number(c.gamma_claimed)},
          {"hinf_bisection", optional_number(c.hinf_bisection)},
          {"hinf_bisection_without_feedthrough",
           optional_number(c.hinf_bisection_without_feedthrough)},
          {"hinf_sweep", optional_number(c.hinf_sweep)},
          {"hinf_ok", c.hinf_ok},
          {"failure", c.failure}};
}

json result_to_json(const SynthesisResult& res,
                    const std::optional<Certification>& cert) {
  json j = {{"status", to_string(res.status)},
            {"method", to_string(res.family)},
            {"objective", to_string(res.objective)}};
  if (res.feasible()) {
    j["K"] = matrix_to_json(res.K);
    j["gamma"] = optional_number(res.gamma);
  }
  j["certificates"] = cert ? certification_to_json(*cert) : json::object();
  const SynthesisVariables& v = res.variables;
  json stats = {{"solve_time_s", res.stats.solve_time_s},
                {"iterations", res.stats.iterations},
                {"solver_status", res.stats.solver_status},
                {"message", res.stats.message},
                {"num_variables", res.stats.num_variables},
                {"num_lmis", res.stats.num_lmis}};
  if (v.rho) stats["rho"] = optional_number(v.rho);
  if (v.eta) stats["eta"] = optional_number(v.eta);
  if (v.literal_margin) stats["literal_margin"] = optional_number(v.literal_margin);
  if (v.literal_eta_residual) {
    stats["literal_eta_residual"] = optional_number(v.literal_eta_residual);
  }
  j["stats"] = stats;
  return j;
}

GainFile gain_from_json(const json& j) {
  GainFile g;
  if (!j.is_object()) throw InputError("result file must be a JSON object");
  if (j.contains("status") && j["status"].is_string()) g.status = j["status"];
  if (j.contains("method") && j["method"].is_string()) g.method = j["method"];
  g.K = matrix_from_json(require(j, "K", "result"), "K");
  if (j.contains("gamma") && !j["gamma"].is_null()) {
    if (!j["gamma"].is_number()) throw InputError("gamma must be a number");
    g.gamma = j["gamma"].get<double>();
  }
  return g;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace cliquesynth
