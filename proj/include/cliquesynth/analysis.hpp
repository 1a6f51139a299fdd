#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cliquesynth/conic.hpp"
#include "cliquesynth/lifting.hpp"

namespace cliquesynth {

/// x⁺ = A x + Bv v, y = C x + Dw v with A = A_plant + B K and
/// C = C_plant + D K (or C_plant when the feedthrough is dropped).
template <typename Scalar>
struct ClosedLoopT {
  MatrixX<Scalar> A, Bv, C, Dw;

  int n() const { return static_cast<int>(A.rows()); }
};
using ClosedLoop = ClosedLoopT<double>;

template <typename Scalar>
ClosedLoopT<Scalar> close_loop(const PlantT<Scalar>& plant,
                               const MatrixX<Scalar>& K,
                               bool include_feedthrough = true) {
  if (K.rows() != plant.m() || K.cols() != plant.n()) {
    throw std::invalid_argument("close_loop: K must be m x n");
  }
  ClosedLoopT<Scalar> loop;
  loop.A = plant.A + plant.B * K;
  loop.Bv = plant.Bv;
  loop.C = plant.C;
  if (include_feedthrough && plant.D.size() > 0) loop.C += plant.D * K;
  loop.Dw = plant.Dw;
  return loop;
}

class NotSchurError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// max |λ(A)|.
template <typename Derived>
double spectral_radius(const Eigen::MatrixBase<Derived>& A) {
  if (A.rows() != A.cols()) {
    throw std::invalid_argument("spectral_radius: matrix must be square");
  }
  if (A.rows() == 0) return 0.0;
  using Scalar = typename Derived::Scalar;
  Eigen::EigenSolver<MatrixX<Scalar>> es(A.eval(), false);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("spectral_radius: eigenvalue solver failed");
  }
  return static_cast<double>(es.eigenvalues().cwiseAbs().maxCoeff());
}

/// σ_max(T(e^{jθ})) with T(z) = C (zI − A)⁻¹ Bv + Dw.
template <typename Scalar>
double frequency_gain(const ClosedLoopT<Scalar>& loop, double theta) {
  using Complex = std::complex<Scalar>;
  using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
  const int n = loop.n();
  CMatrix T = loop.Dw.template cast<Complex>();
  if (n > 0 && loop.C.size() > 0 && loop.Bv.size() > 0) {
    const Complex z = std::polar(Scalar(1), Scalar(theta));
    CMatrix zi_a = -loop.A.template cast<Complex>();
    zi_a.diagonal().array() += z;
    const CMatrix x = zi_a.partialPivLu().solve(loop.Bv.template cast<Complex>());
    T += loop.C.template cast<Complex>() * x;
  }
  if (T.size() == 0) return 0.0;
  // σ_max² is the top eigenvalue of the smaller Gram matrix.
  const CMatrix gram = T.rows() < T.cols() ? CMatrix(T * T.adjoint())
                                           : CMatrix(T.adjoint() * T);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(gram, Eigen::EigenvaluesOnly);
  const Scalar top = es.eigenvalues()(es.eigenvalues().size() - 1);
  return static_cast<double>(std::sqrt(std::max(top, Scalar(0))));
}

/// Lower bound on ‖T‖∞: maximum of σ_max(T(e^{jθ})) over a uniform grid of
/// `grid_points` angles on [0, π] (endpoints included).
template <typename Scalar>
double hinf_norm_sweep(const ClosedLoopT<Scalar>& loop, int grid_points = 10000) {
  if (grid_points < 2) {
    throw std::invalid_argument("hinf_norm_sweep: need at least two points");
  }
  if (spectral_radius(loop.A) >= 1.0) {
    throw NotSchurError("hinf_norm_sweep: closed loop is not Schur stable");
  }
  const double pi = 3.14159265358979323846;
  double best = 0.0;
  for (int k = 0; k < grid_points; ++k) {
    const double theta = pi * k / (grid_points - 1);
    best = std::max(best, frequency_gain(loop, theta));
  }
  return best;
}

template <typename Scalar>
struct TrajectoryT {
  std::vector<VectorX<Scalar>> x;  // steps + 1 states, x[0] = x0
  std::vector<VectorX<Scalar>> y;  // steps outputs
};
using Trajectory = TrajectoryT<double>;

/// Rolls the loop forward. Missing disturbance samples count as zero.
template <typename Scalar>
TrajectoryT<Scalar> simulate(const ClosedLoopT<Scalar>& loop,
                             const std::vector<VectorX<Scalar>>& w,
                             const VectorX<Scalar>& x0, int steps) {
  if (x0.size() != loop.n()) {
    throw std::invalid_argument("simulate: x0 has the wrong size");
  }
  const int mv = static_cast<int>(loop.Bv.cols());
  const VectorX<Scalar> zero = VectorX<Scalar>::Zero(mv);
  TrajectoryT<Scalar> out;
  out.x.reserve(steps + 1);
  out.y.reserve(steps);
  out.x.push_back(x0);
  for (int k = 0; k < steps; ++k) {
    const VectorX<Scalar>& wk =
        k < static_cast<int>(w.size()) ? w[k] : zero;
    if (wk.size() != mv) {
      throw std::invalid_argument("simulate: disturbance has the wrong size");
    }
    const VectorX<Scalar>& xk = out.x.back();
    VectorX<Scalar> yk = mv > 0 ? VectorX<Scalar>(loop.Dw * wk)
                                : VectorX<Scalar>::Zero(loop.C.rows());
    if (loop.C.size() > 0) yk += loop.C * xk;
    VectorX<Scalar> next = loop.A * xk;
    if (mv > 0) next += loop.Bv * wk;
    out.y.push_back(std::move(yk));
    out.x.push_back(std::move(next));
  }
  return out;
}

struct LyapunovCertificate {
  bool feasible = false;
  Eigen::MatrixXd P;
  /// λ_max(Aᵀ P A − P) at the witness; negative when feasible.
  double residual = 0.0;
  double min_eig_p = 0.0;
  std::string message;
};

/// Searches for P ≻ 0 with Aᵀ P A − P ≺ 0, optionally with P restricted to a
/// block sparsity pattern. Solved as: maximize s subject to P ⪰ sI,
/// P − AᵀPA ⪰ sI, tr P = n, and accepted only when the returned P passes an
/// eigenvalue check.
LyapunovCertificate lyapunov_feasibility(
    const Eigen::MatrixXd& A, const BlockStructure* structure = nullptr,
    const SparsityPattern* pattern = nullptr,
    const conic::SolverOptions& solver = {});

struct NormOptions {
  double tol_rel = 1e-4;
  int max_iterations = 60;
  int coarse_points = 256;
  conic::SolverOptions solver;
};

struct BisectionResult {
  /// Certified upper bound on ‖T‖∞ (witness P verified by eigenvalues).
  double upper = 0.0;
  /// Largest γ at which no certificate was found.
  double lower = 0.0;
  int iterations = 0;
  Eigen::MatrixXd witness;
  bool converged = false;
};

/// Bounded-real-lemma bisection. The LMI
///   [[−P, PA, PBv, 0], [∗, −P, 0, Cᵀ], [∗, ∗, −γI, Dwᵀ], [∗, ∗, ∗, −γI]] ≺ 0
/// with P ≻ 0 is tested at each γ; the bracket starts at
/// [σ_max(Dw), 2 × coarse sweep]. Throws NotSchurError for unstable loops.
BisectionResult hinf_norm_bisection(const ClosedLoop& loop,
                                    const NormOptions& options = {});

/// Single BRL test: returns the witness P when γ is certified.
std::optional<Eigen::MatrixXd> brl_certificate(const ClosedLoop& loop,
                                               double gamma,
                                               const conic::SolverOptions& solver);

struct CertificationOptions {
  double pattern_tol = 1e-8;
  double gamma_rel_tol = 1e-3;
  /// Also bisect the norm of the loop without the D·K feedthrough.
  bool norm_without_feedthrough = true;
  int sweep_points = 10000;
  NormOptions norm;
};

struct Certification {
  bool pattern_ok = false;
  double off_pattern = 0.0;
  double spectral_radius = 0.0;
  bool schur = false;
  bool lyapunov_ok = false;
  double lyapunov_residual = 0.0;
  std::optional<double> gamma_claimed;
  std::optional<double> hinf_bisection;
  std::optional<double> hinf_bisection_without_feedthrough;
  std::optional<double> hinf_sweep;
  bool hinf_ok = true;
  std::string failure;

  bool passed() const { return pattern_ok && schur && lyapunov_ok && hinf_ok; }
};

/// Independent checks of a gain: sparsity pattern, Schur stability, a
/// Lyapunov witness, and (when `gamma` is given) a bisection-certified H∞
/// bound no larger than γ(1 + gamma_rel_tol).
Certification certify_controller(const Plant& plant, const Eigen::MatrixXd& K,
                                 const BlockStructure& structure,
                                 const SparsityPattern& pattern,
                                 std::optional<double> gamma,
                                 const CertificationOptions& options = {});

}  // namespace cliquesynth
