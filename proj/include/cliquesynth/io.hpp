#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "cliquesynth/analysis.hpp"
#include "cliquesynth/benchmark.hpp"
#include "cliquesynth/synthesis.hpp"

namespace cliquesynth {

/// Malformed or inconsistent input file.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
/// Rows of numbers; `cols` gives the width of an empty matrix.
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what,
                                 Eigen::Index cols_if_empty = 0);

/// Edges are written 1-based.
nlohmann::json instance_to_json(const Instance& inst);
/// Validates the schema and cross-checks dimensions. Missing H∞ channels
/// (Bv, C, D, Dw) load as empty matrices.
Instance instance_from_json(const nlohmann::json& j);

nlohmann::json certification_to_json(const Certification& cert);

nlohmann::json result_to_json(const SynthesisResult& res,
                              const std::optional<Certification>& cert);

/// The parts of a result file needed to re-check a gain.
struct GainFile {
  std::string status;
  std::string method;
  Eigen::MatrixXd K;
  std::optional<double> gamma;
};
GainFile gain_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace cliquesynth
