#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "cliquesynth/analysis.hpp"
#include "cliquesynth/graph.hpp"
#include "cliquesynth/lifting.hpp"
#include "cliquesynth/synthesis.hpp"

namespace cliquesynth {

enum class Discretization { kZoh, kEuler };
Discretization parse_discretization(const std::string& name);
const char* to_string(Discretization d);

struct ExperimentConfig {
  int samples = 50;
  int agents = 10;
  int block_size = 1;
  double radius = 0.4;
  double sample_time = 0.01;
  Discretization discretization = Discretization::kZoh;
  /// Continuous entries are drawn from the open interval (entry_low, entry_high).
  double entry_low = 0.0;
  double entry_high = 1.0;
  std::uint64_t seed = 1;
  int workers = 1;
  /// When false, time columns are written as 0 so the CSV only depends on
  /// the seed and the numerics.
  bool record_timing = true;
  SynthesisNumerics numerics;
  /// The sweep certifies the D·K-inclusive norm only.
  CertificationOptions certification = [] {
    CertificationOptions o;
    o.norm_without_feedthrough = false;
    return o;
  }();

  void validate() const;
};

template <typename Scalar>
struct ContinuousPlantT {
  MatrixX<Scalar> A, B;
};
using ContinuousPlant = ContinuousPlantT<double>;

/// A_c (n × n) and B_c (n × m) with iid entries in (entry_low, entry_high).
ContinuousPlant random_continuous_plant(const ExperimentConfig& config,
                                       std::mt19937_64& rng);

template <typename Scalar>
struct DiscretePairT {
  MatrixX<Scalar> A, B;
};
using DiscretePair = DiscretePairT<double>;

/// Zero-order hold through the exponential of [[A_c, B_c], [0, 0]]·T.
template <typename Scalar>
DiscretePairT<Scalar> zoh_discretize(const MatrixX<Scalar>& Ac,
                                     const MatrixX<Scalar>& Bc, Scalar T) {
  if (!(T > Scalar(0))) throw std::invalid_argument("zoh_discretize: T must be positive");
  if (Ac.rows() != Ac.cols() || Bc.rows() != Ac.rows()) {
    throw std::invalid_argument("zoh_discretize: shape mismatch");
  }
  const Eigen::Index n = Ac.rows();
  const Eigen::Index m = Bc.cols();
  MatrixX<Scalar> aug = MatrixX<Scalar>::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = Ac * T;
  aug.topRightCorner(n, m) = Bc * T;
  const MatrixX<Scalar> e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

template <typename Scalar>
DiscretePairT<Scalar> euler_discretize(const MatrixX<Scalar>& Ac,
                                       const MatrixX<Scalar>& Bc, Scalar T) {
  if (!(T > Scalar(0))) throw std::invalid_argument("euler_discretize: T must be positive");
  MatrixX<Scalar> A = Ac * T;
  A.diagonal().array() += Scalar(1);
  return {A, Bc * T};
}

/// A synthesis instance: topology, block sizes and the discrete plant.
struct Instance {
  BlockStructure structure;
  Graph graph{1};
  std::vector<Eigen::Vector2d> positions;
  Plant plant;
};

/// Disk graph followed by a random discretized plant, both drawn from one
/// generator seeded with `seed`. Bv, C, D and Dw are identities.
Instance generate_instance(const ExperimentConfig& config, std::uint64_t seed);

inline constexpr std::array<Family, 5> kBenchmarkFamilies = {
    Family::kDiag, Family::kExt, Family::kClique, Family::kCliqueExt,
    Family::kCentralized};
inline constexpr int kCentralizedIndex = 4;

struct MethodRecord {
  SynthesisStatus status = SynthesisStatus::kNumericalFailure;
  bool certified = false;
  std::optional<double> gamma;
  /// γ / γ_cen, set when this method and the baseline both succeeded.
  std::optional<double> ratio;
  double time_ms = 0.0;
  std::string failure;

  bool failed() const { return !certified; }
  /// Infeasible, NumericalFailure, or CertificationFailure.
  std::string status_label() const;
};

struct SampleRecord {
  int sample = 0;
  std::uint64_t seed = 0;
  int edges = 0;
  int cliques = 0;
  std::array<MethodRecord, 5> methods;
};

struct MethodSummary {
  int failures = 0;
  int ratio_count = 0;
  double mean_ratio = 0.0;
  double median_ratio = 0.0;
};

struct ExperimentResult {
  std::vector<SampleRecord> samples;
  std::array<MethodSummary, 5> summary;
  /// Samples whose centralized baseline failed; they carry no ratios.
  int baseline_failures = 0;
};

/// Runs one sample: all five methods, each certified independently.
SampleRecord run_sample(const ExperimentConfig& config, int index);

/// Sample i uses seed config.seed + i. Samples run on up to `workers`
/// threads and are stored by index, so the output does not depend on it.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_csv(std::ostream& os, const ExperimentResult& result);
/// Long format: sample, method, ratio, failed.
void write_plot_data(std::ostream& os, const ExperimentResult& result);
void write_summary(std::ostream& os, const ExperimentResult& result);

}  // namespace cliquesynth
