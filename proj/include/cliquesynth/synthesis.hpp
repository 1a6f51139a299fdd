#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "cliquesynth/conic.hpp"
#include "cliquesynth/graph.hpp"
#include "cliquesynth/lifting.hpp"

namespace cliquesynth {

enum class Family { kDiag, kExt, kClique, kCliqueExt, kCentralized };
enum class Objective { kStabilize, kHinfMinimize, kHinfFeasible };

/// kReduced solves an equivalent program in which the multiplier ρ is
/// eliminated by projecting onto null(M) and the η-constraint is restricted
/// to the face it forces (N X E = 0); kLiteral states the constraints as
/// written with ρ and η as free decision variables.
enum class Formulation { kReduced, kLiteral };

const char* to_string(Family family);
const char* to_string(Objective objective);
const char* to_string(Formulation formulation);
/// "diag", "ext", "clique", "clique-ext", "centralized".
Family parse_family(const std::string& name);
/// "stabilize", "hinf" (minimize γ).
Objective parse_objective(const std::string& name);
Formulation parse_formulation(const std::string& name);

struct SynthesisMethod {
  Family family = Family::kCliqueExt;
  Objective objective = Objective::kHinfMinimize;
  /// Fixed γ for kHinfFeasible.
  double gamma = 0.0;
};

struct SynthesisNumerics {
  /// ε = epsilon_rel · (1 + ‖A‖max) is the margin of every strict LMI.
  double epsilon_rel = 1e-7;
  double eta_min = 1e-6;
  /// Reciprocal condition threshold for inverting Q, G or clique blocks.
  double rcond_min = 1e-12;
  /// Relative pattern tolerance applied to the recovered gain.
  double pattern_tol = 1e-8;
  Formulation formulation = Formulation::kReduced;
  conic::SolverOptions solver;
};

struct SynthesisProblem {
  Plant plant;
  BlockStructure structure;
  Graph graph{1};
  CliqueCover cover;
  SynthesisMethod method;
  SynthesisNumerics numerics;

  /// Throws std::invalid_argument on shape mismatches, n_i ≠ m_i, or (for
  /// the clique families) a cover failing verify_assumption1.
  void validate() const;
  double epsilon() const;
  bool lifted() const {
    return method.family == Family::kClique ||
           method.family == Family::kCliqueExt;
  }
  bool hinf() const { return method.objective != Objective::kStabilize; }
  SparsityPattern pattern() const;
};

enum class SynthesisStatus { kOptimal, kFeasible, kInfeasible, kNumericalFailure };
const char* to_string(SynthesisStatus status);

/// Raw decision values. For the clique families Q, G, Z are the lifted
/// (clique-block) matrices; ρ and η are reported for them only.
struct SynthesisVariables {
  Eigen::MatrixXd Q, G, Z;
  std::optional<double> rho;
  std::optional<double> eta;
  /// Literal clique constraints evaluated at the returned point:
  /// λ_min(Φ/Ψ + ρM) (stabilization) or −λ_max(Γ/Θ + ρ·blkdiag(M,0)) (H∞),
  /// which should be at least ε/2, and λ_min(NX + XᵀN − ηN), which should
  /// be ≥ about −1e-7.
  std::optional<double> literal_margin;
  std::optional<double> literal_eta_residual;
};

struct SynthesisStats {
  double solve_time_s = 0.0;
  int iterations = 0;
  std::string solver_status;
  std::string message;
  int num_variables = 0;
  int num_lmis = 0;
};

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::kNumericalFailure;
  Family family = Family::kCliqueExt;
  Objective objective = Objective::kHinfMinimize;
  Eigen::MatrixXd K;
  std::optional<double> gamma;
  SynthesisVariables variables;
  SynthesisStats stats;

  bool feasible() const {
    return status == SynthesisStatus::kOptimal ||
           status == SynthesisStatus::kFeasible;
  }
};

/// The assembled program together with handles to its decision variables.
struct AssembledProgram {
  conic::ConicProgram program;
  Formulation formulation = Formulation::kReduced;
  conic::MatrixVariable Q, G, Z;
  bool has_G = false;
  /// CliqueSExt (reduced) parametrizes VᵀQ̃V directly; Q is then n × n.
  bool q_projected = false;
  std::optional<conic::ScalarVariable> gamma, rho, eta;
  double epsilon = 0.0;
};

AssembledProgram assemble_stabilization(const SynthesisProblem& problem);
/// γ is a decision variable (minimized) unless `fixed_gamma` is given.
AssembledProgram assemble_hinf(const SynthesisProblem& problem,
                               std::optional<double> fixed_gamma);

/// Assemble, solve, recover K, and check its pattern and Schur stability.
SynthesisResult synthesize(const SynthesisProblem& problem);

/// Ext with full G and Z (complete graph).
SynthesisResult centralized_baseline(const Plant& plant,
                                     const BlockStructure& structure,
                                     Objective objective,
                                     const SynthesisNumerics& numerics = {});

}  // namespace cliquesynth
