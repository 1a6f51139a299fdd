#pragma once

#include <string>

#include "cliquesynth/conic.hpp"

namespace cliquesynth::conic {

/// Primal-dual interior-point method for
///   minimize cᵀy  s.t.  F₀ₖ + Σᵢ yᵢ Fᵢₖ ⪰ 0,  A_eq y = b_eq.
///
/// Equalities are eliminated up front (y = y₀ + W t with W from a reduced
/// row-echelon form), variable-free blocks are checked directly, and the
/// remaining program is solved with the HKM search direction and a Mehrotra
/// predictor-corrector from an infeasible start. Infeasibility is reported
/// when the dual iterate approaches a Farkas certificate
/// X ⪰ 0, ⟨Fᵢ, X⟩ = 0, ⟨F₀, X⟩ < 0.
class InteriorPointAdapter : public SolverAdapter {
 public:
  std::string name() const override { return "hkm-ipm"; }
  bool reentrant() const override { return true; }
  SolveOutcome solve(const CompiledProgram& program,
                     const SolverOptions& options) const override;
};

}  // namespace cliquesynth::conic
