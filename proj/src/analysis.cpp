#include "cliquesynth/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace cliquesynth {

namespace {

using Eigen::MatrixXd;

double max_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double min_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

MatrixXd brl_matrix(const ClosedLoop& loop, const MatrixXd& P, double gamma) {
  const int n = loop.n();
  const int mv = static_cast<int>(loop.Bv.cols());
  const int l = static_cast<int>(loop.C.rows());
  const int d = 2 * n + mv + l;
  MatrixXd m = MatrixXd::Zero(d, d);
  m.block(0, 0, n, n) = -P;
  m.block(0, n, n, n) = P * loop.A;
  m.block(0, 2 * n, n, mv) = P * loop.Bv;
  m.block(n, n, n, n) = -P;
  m.block(n, 2 * n + mv, n, l) = loop.C.transpose();
  m.block(2 * n, 2 * n, mv, mv) = -gamma * MatrixXd::Identity(mv, mv);
  m.block(2 * n, 2 * n + mv, mv, l) = loop.Dw.transpose();
  m.block(2 * n + mv, 2 * n + mv, l, l) = -gamma * MatrixXd::Identity(l, l);
  m.triangularView<Eigen::StrictlyLower>() =
      m.transpose().triangularView<Eigen::StrictlyLower>();
  return m;
}

}  // namespace

LyapunovCertificate lyapunov_feasibility(const MatrixXd& A,
                                         const BlockStructure* structure,
                                         const SparsityPattern* pattern,
                                         const conic::SolverOptions& solver) {
  using namespace conic;
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw std::invalid_argument("lyapunov_feasibility: A must be square");
  }
  const int n = static_cast<int>(A.rows());
  ConicProgram prog;
  MatrixVariable P;
  if (pattern) {
    if (!structure || structure->n() != n ||
        pattern->nodes() != structure->nodes()) {
      throw std::invalid_argument(
          "lyapunov_feasibility: pattern needs a matching block structure");
    }
    P = prog.add_matrix_variable("P", structure->n_sizes, structure->n_sizes,
                                 pattern->allowed, Symmetry::kSymmetric);
  } else {
    P = prog.add_full("P", n, n, Symmetry::kSymmetric);
  }
  const ScalarVariable s = prog.add_scalar("s");
  const MatrixXd I = MatrixXd::Identity(n, n);

  AffineExpression pos(n, n);
  pos.add(0, 0, P).add(0, 0, -I, s);
  prog.add_psd_constraint("P >= sI", std::move(pos));

  AffineExpression decrease(n, n);
  decrease.add(0, 0, P).add(0, 0, -A.transpose(), P, A).add(0, 0, -I, s);
  prog.add_psd_constraint("P - A'PA >= sI", std::move(decrease));

  AffineExpression trace(1, 1);
  for (int i = 0; i < n; ++i)
    trace.add(0, 0, I.row(i), P, I.col(i));
  trace.add_constant(0, 0, MatrixXd::Constant(1, 1, -n));
  prog.add_equality("trace P = n", std::move(trace));

  Eigen::VectorXd c = Eigen::VectorXd::Zero(prog.num_variables());
  c(s.index) = -1.0;
  prog.set_objective(c);

  LyapunovCertificate cert;
  const SolveOutcome out = conic::solve(prog, solver);
  if (!out.ok()) {
    cert.message = std::string("solver: ") + to_string(out.status) + " " +
                   out.message;
    return cert;
  }
  cert.P = value(P, out.x);
  cert.P = 0.5 * (cert.P + cert.P.transpose()).eval();
  cert.residual = max_eig(A.transpose() * cert.P * A - cert.P);
  cert.min_eig_p = min_eig(cert.P);
  cert.feasible = cert.residual < 0.0 && cert.min_eig_p > 0.0;
  if (!cert.feasible) cert.message = "no Lyapunov witness";
  return cert;
}

std::optional<MatrixXd> brl_certificate(const ClosedLoop& loop, double gamma,
                                        const conic::SolverOptions& solver) {
  using namespace conic;
  const int n = loop.n();
  const int mv = static_cast<int>(loop.Bv.cols());
  const int l = static_cast<int>(loop.C.rows());
  const int d = 2 * n + mv + l;
  ConicProgram prog;
  const MatrixVariable P = prog.add_full("P", n, n, Symmetry::kSymmetric);
  const ScalarVariable s = prog.add_scalar("s");
  const MatrixXd In = MatrixXd::Identity(n, n);

  AffineExpression pos(n, n);
  pos.add(0, 0, P).add(0, 0, -In, s);
  prog.add_psd_constraint("P >= sI", std::move(pos));

  // −BRL(P, γ) − sI ⪰ 0.
  AffineExpression brl(d, d);
  brl.add(0, 0, P);
  brl.add(0, n, -In, P, loop.A, false, true);
  if (mv > 0) brl.add(0, 2 * n, -In, P, loop.Bv, false, true);
  brl.add(n, n, P);
  MatrixXd constant = MatrixXd::Zero(d, d);
  constant.block(n, 2 * n + mv, n, l) = -loop.C.transpose();
  constant.block(2 * n + mv, n, l, n) = -loop.C;
  constant.block(2 * n, 2 * n + mv, mv, l) = -loop.Dw.transpose();
  constant.block(2 * n + mv, 2 * n, l, mv) = -loop.Dw;
  constant.diagonal().tail(mv + l).setConstant(gamma);
  brl.add_constant(0, 0, constant);
  brl.add(0, 0, -MatrixXd::Identity(d, d), s);
  prog.add_psd_constraint("-BRL >= sI", std::move(brl));

  Eigen::VectorXd c = Eigen::VectorXd::Zero(prog.num_variables());
  c(s.index) = -1.0;
  prog.set_objective(c);

  const SolveOutcome out = conic::solve(prog, solver);
  if (!out.ok()) return std::nullopt;
  MatrixXd Pv = value(P, out.x);
  Pv = 0.5 * (Pv + Pv.transpose()).eval();
  if (min_eig(Pv) <= 0.0) return std::nullopt;
  if (max_eig(brl_matrix(loop, Pv, gamma)) >= 0.0) return std::nullopt;
  return Pv;
}

BisectionResult hinf_norm_bisection(const ClosedLoop& loop,
                                    const NormOptions& options) {
  if (spectral_radius(loop.A) >= 1.0) {
    throw NotSchurError("hinf_norm_bisection: closed loop is not Schur stable");
  }
  BisectionResult res;
  double lo = 0.0;
  if (loop.Dw.size() > 0) {
    Eigen::JacobiSVD<MatrixXd> svd(loop.Dw);
    lo = svd.singularValues()(0);
  }
  const double coarse = hinf_norm_sweep(loop, options.coarse_points);
  double hi = 2.0 * std::max(coarse, lo);
  if (hi <= 0.0) hi = 1e-12;

  // Make sure the upper end is certified; a coarse sweep can miss a peak.
  std::optional<MatrixXd> witness;
  for (int k = 0; k < 20; ++k) {
    witness = brl_certificate(loop, hi, options.solver);
    ++res.iterations;
    if (witness) break;
    lo = std::max(lo, hi);
    hi *= 2.0;
  }
  if (!witness) {
    res.upper = std::numeric_limits<double>::infinity();
    res.lower = lo;
    return res;
  }
  res.witness = *witness;

  int iter = 0;
  while (hi - lo > options.tol_rel * hi && iter < options.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    auto w = brl_certificate(loop, mid, options.solver);
    if (w) {
      hi = mid;
      res.witness = std::move(*w);
    } else {
      lo = mid;
    }
    ++iter;
  }
  res.iterations += iter;
  res.upper = hi;
  res.lower = lo;
  res.converged = hi - lo <= options.tol_rel * hi;
  return res;
}

Certification certify_controller(const Plant& plant, const MatrixXd& K,
                                 const BlockStructure& structure,
                                 const SparsityPattern& pattern,
                                 std::optional<double> gamma,
                                 const CertificationOptions& options) {
  Certification cert;
  cert.gamma_claimed = gamma;
  const auto fail = [&](const std::string& why) {
    if (cert.failure.empty()) cert.failure = why;
  };
  if (!K.allFinite()) {
    fail("gain has non-finite entries");
    cert.hinf_ok = !gamma.has_value();
    return cert;
  }
  cert.off_pattern = off_pattern_max(K, pattern, structure);
  cert.pattern_ok =
      pattern_test(K, pattern, structure, options.pattern_tol);
  if (!cert.pattern_ok) fail("gain violates the sparsity pattern");

  const ClosedLoop loop = close_loop(plant, K, true);
  cert.spectral_radius = spectral_radius(loop.A);
  cert.schur = cert.spectral_radius < 1.0;
  if (!cert.schur) {
    fail("closed loop is not Schur stable");
    cert.hinf_ok = !gamma.has_value();
    return cert;
  }

  const LyapunovCertificate lyap =
      lyapunov_feasibility(loop.A, nullptr, nullptr, options.norm.solver);
  cert.lyapunov_ok = lyap.feasible;
  cert.lyapunov_residual = lyap.residual;
  if (!cert.lyapunov_ok) fail("no Lyapunov witness found");

  if (gamma) {
    if (!plant.has_hinf_channels()) {
      cert.hinf_ok = false;
      fail("H-infinity bound requested for a plant without channels");
      return cert;
    }
    const BisectionResult b = hinf_norm_bisection(loop, options.norm);
    cert.hinf_bisection = b.upper;
    cert.hinf_sweep = hinf_norm_sweep(loop, options.sweep_points);
    cert.hinf_ok = b.upper <= *gamma * (1.0 + options.gamma_rel_tol);
    if (!cert.hinf_ok) fail("bisection norm exceeds the claimed gamma");
    if (options.norm_without_feedthrough && plant.D.size() > 0 &&
        (plant.D * K).cwiseAbs().maxCoeff() > 0.0) {
      const ClosedLoop bare = close_loop(plant, K, false);
      cert.hinf_bisection_without_feedthrough =
          hinf_norm_bisection(bare, options.norm).upper;
    }
  }
  return cert;
}

}  // namespace cliquesynth
