#include "cliquesynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "cliquesynth/analysis.hpp"

namespace cliquesynth {

namespace {

using Eigen::MatrixXd;
using conic::AffineExpression;
using conic::ConicProgram;
using conic::MatrixVariable;
using conic::ScalarVariable;
using conic::Symmetry;

// Plant data in the coordinates the LMIs are written in (lifted for the
// clique families) plus the projection applied to the lifted blocks.
struct Model {
  MatrixXd A, B, Bv, C, D, Dw;
  MatrixXd P;  // s × r: identity, or V = E (EᵀE)^{-1/2} for the reduced form
  std::optional<LiftedBasis> basis;
  bool has_complement = false;  // N ≠ 0

  int s() const { return static_cast<int>(A.rows()); }
  int r() const { return static_cast<int>(P.cols()); }
};

Model build_model(const SynthesisProblem& pb) {
  Model m;
  if (!pb.lifted()) {
    m.A = pb.plant.A;
    m.B = pb.plant.B;
    m.Bv = pb.plant.Bv;
    m.C = pb.plant.C;
    m.D = pb.plant.D;
    m.Dw = pb.plant.Dw;
    m.P = MatrixXd::Identity(m.A.rows(), m.A.rows());
    return m;
  }
  m.basis = build_lifted_basis<double>(pb.structure, pb.graph, pb.cover);
  const DilatedPlant dp = dilate_plant(pb.plant, *m.basis);
  m.A = dp.A_til;
  m.B = dp.B_til;
  m.Bv = dp.Bv_til;
  m.C = dp.C_til;
  m.D = dp.D_til;
  m.Dw = dp.Dw;
  m.has_complement = m.basis->lifted_dim() > m.basis->state_dim();
  if (pb.numerics.formulation == Formulation::kReduced) {
    m.P = m.basis->range_basis();
  } else {
    m.P = MatrixXd::Identity(m.s(), m.s());
  }
  return m;
}

bool is_ext(Family f) {
  return f == Family::kExt || f == Family::kCliqueExt ||
         f == Family::kCentralized;
}

void declare_variables(const SynthesisProblem& pb, const Model& m,
                       AssembledProgram& ap) {
  ConicProgram& prog = ap.program;
  const BlockStructure& st = pb.structure;
  const int n = st.n();
  switch (pb.method.family) {
    case Family::kDiag:
      ap.Q = prog.add_block_diagonal("Q", st.n_sizes, Symmetry::kSymmetric);
      ap.Z = prog.add_matrix_variable("Z", st.m_sizes, st.n_sizes,
                                      pb.pattern().allowed, Symmetry::kGeneral);
      break;
    case Family::kExt:
      ap.Q = prog.add_full("Q", n, n, Symmetry::kSymmetric);
      ap.G = prog.add_block_diagonal("G", st.n_sizes, Symmetry::kGeneral);
      ap.Z = prog.add_matrix_variable("Z", st.m_sizes, st.n_sizes,
                                      pb.pattern().allowed, Symmetry::kGeneral);
      ap.has_G = true;
      break;
    case Family::kCentralized:
      ap.Q = prog.add_full("Q", n, n, Symmetry::kSymmetric);
      ap.G = prog.add_full("G", n, n, Symmetry::kGeneral);
      ap.Z = prog.add_full("Z", st.m(), n, Symmetry::kGeneral);
      ap.has_G = true;
      break;
    case Family::kClique:
      ap.Q = prog.add_block_diagonal("Qt", m.basis->clique_sizes,
                                     Symmetry::kSymmetric);
      ap.Z = prog.add_block_diagonal("Zt", m.basis->clique_sizes,
                                     Symmetry::kGeneral);
      break;
    case Family::kCliqueExt:
      if (pb.numerics.formulation == Formulation::kReduced) {
        ap.Q = prog.add_full("Qhat", n, n, Symmetry::kSymmetric);
        ap.q_projected = true;
      } else {
        ap.Q = prog.add_full("Qt", m.s(), m.s(), Symmetry::kSymmetric);
      }
      ap.G = prog.add_block_diagonal("Gt", m.basis->clique_sizes,
                                     Symmetry::kGeneral);
      ap.Z = prog.add_block_diagonal("Zt", m.basis->clique_sizes,
                                     Symmetry::kGeneral);
      ap.has_G = true;
      break;
  }
}

// scale · PᵀQP at (r0, c0).
void add_q(AffineExpression& e, const AssembledProgram& ap, const Model& m,
           int r0, int c0, double scale) {
  if (ap.q_projected) {
    e.add(r0, c0, ap.Q, scale);
  } else {
    e.add(r0, c0, scale * m.P.transpose(), ap.Q, m.P);
  }
}

// The η-constraint and, for the reduced form, the face equalities N X E = 0.
void add_clique_side_constraints(const SynthesisProblem& pb, const Model& m,
                                 AssembledProgram& ap) {
  if (!m.has_complement) return;
  ConicProgram& prog = ap.program;
  const LiftedBasis& b = *m.basis;
  const int L = b.lifted_dim();
  const MatrixXd I = MatrixXd::Identity(L, L);
  const bool ext = pb.method.family == Family::kCliqueExt;
  const MatrixVariable& X = ext ? ap.G : ap.Q;
  const bool reduced = pb.numerics.formulation == Formulation::kReduced;

  ap.eta = prog.add_scalar("eta", pb.numerics.eta_min);
  AffineExpression eta_lmi(L, L);
  if (ext) {
    eta_lmi.add(0, 0, I, X, b.N, true).add(0, 0, b.N, X, I);
  } else {
    eta_lmi.add(0, 0, b.N, X, I).add(0, 0, I, X, b.N);
  }
  eta_lmi.add(0, 0, -b.N, *ap.eta);
  if (reduced) {
    eta_lmi.add_constant(0, 0, I - b.N);
    AffineExpression face(L, b.state_dim());
    face.add(0, 0, b.N, X, b.E);
    prog.add_equality("N X E = 0", std::move(face));
  } else {
    ap.rho = prog.add_scalar("rho");
  }
  prog.add_psd_constraint("eta", std::move(eta_lmi));

  if (!reduced) {
    AffineExpression qpos(L, L);
    qpos.add(0, 0, ap.Q).add_constant(0, 0, -ap.epsilon * I);
    prog.add_psd_constraint("Qt > 0", std::move(qpos));
  }
}

AssembledProgram begin(const SynthesisProblem& pb, Model& m) {
  pb.validate();
  m = build_model(pb);
  AssembledProgram ap;
  ap.formulation = pb.numerics.formulation;
  ap.epsilon = pb.epsilon();
  declare_variables(pb, m, ap);
  return ap;
}

MatrixXd padded(const MatrixXd& M, int dim) {
  MatrixXd out = MatrixXd::Zero(dim, dim);
  out.topLeftCorner(M.rows(), M.cols()) = M;
  return out;
}

MatrixXd block_m(const LiftedBasis& b) { return b.M; }

}  // namespace

const char* to_string(Family family) {
  switch (family) {
    case Family::kDiag:
      return "diag";
    case Family::kExt:
      return "ext";
    case Family::kClique:
      return "clique";
    case Family::kCliqueExt:
      return "clique-ext";
    case Family::kCentralized:
      return "centralized";
  }
  return "unknown";
}

const char* to_string(Objective objective) {
  switch (objective) {
    case Objective::kStabilize:
      return "stabilize";
    case Objective::kHinfMinimize:
      return "hinf";
    case Objective::kHinfFeasible:
      return "hinf-feasible";
  }
  return "unknown";
}

const char* to_string(Formulation formulation) {
  return formulation == Formulation::kReduced ? "reduced" : "literal";
}

const char* to_string(SynthesisStatus status) {
  switch (status) {
    case SynthesisStatus::kOptimal:
      return "Optimal";
    case SynthesisStatus::kFeasible:
      return "Feasible";
    case SynthesisStatus::kInfeasible:
      return "Infeasible";
    case SynthesisStatus::kNumericalFailure:
      return "NumericalFailure";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  for (Family f : {Family::kDiag, Family::kExt, Family::kClique,
                   Family::kCliqueExt, Family::kCentralized})
    if (name == to_string(f)) return f;
  throw std::invalid_argument("unknown method '" + name + "'");
}

Objective parse_objective(const std::string& name) {
  if (name == "stabilize") return Objective::kStabilize;
  if (name == "hinf") return Objective::kHinfMinimize;
  if (name == "hinf-feasible") return Objective::kHinfFeasible;
  throw std::invalid_argument("unknown objective '" + name + "'");
}

Formulation parse_formulation(const std::string& name) {
  if (name == "reduced") return Formulation::kReduced;
  if (name == "literal") return Formulation::kLiteral;
  throw std::invalid_argument("unknown formulation '" + name + "'");
}

void SynthesisProblem::validate() const {
  structure.require_square_blocks();
  if (graph.node_count() != structure.nodes()) {
    throw std::invalid_argument(
        "SynthesisProblem: graph size does not match the block structure");
  }
  plant.validate(hinf());
  if (plant.n() != structure.n() || plant.m() != structure.m()) {
    throw std::invalid_argument(
        "SynthesisProblem: plant dimensions do not match the block structure");
  }
  if (lifted()) {
    if (!cliques_are_complete(graph, cover)) {
      throw std::invalid_argument("SynthesisProblem: cover contains a non-clique");
    }
    if (!verify_assumption1(graph, cover)) {
      throw std::invalid_argument(
          "SynthesisProblem: clique cover does not match the graph (uncovered node, or adjacency differs from shared cliques)");
    }
  }
  if (method.objective == Objective::kHinfFeasible && !(method.gamma > 0.0)) {
    throw std::invalid_argument("SynthesisProblem: fixed gamma must be positive");
  }
}

double SynthesisProblem::epsilon() const {
  const double a_max = plant.A.size() ? plant.A.cwiseAbs().maxCoeff() : 0.0;
  return numerics.epsilon_rel * (1.0 + a_max);
}

SparsityPattern SynthesisProblem::pattern() const {
  if (method.family == Family::kCentralized) {
    return SparsityPattern::dense(structure.nodes());
  }
  return SparsityPattern::from_graph(graph);
}

AssembledProgram assemble_stabilization(const SynthesisProblem& pb) {
  Model m;
  AssembledProgram ap = begin(pb, m);
  const int r = m.r();
  const MatrixXd Pt = m.P.transpose();
  AffineExpression e(2 * r, 2 * r);
  if (is_ext(pb.method.family)) {
    e.add(0, 0, Pt, ap.G, m.P).add(0, 0, Pt, ap.G, m.P, true);
    add_q(e, ap, m, 0, 0, -1.0);
    e.add(r, 0, Pt * m.A, ap.G, m.P, false, true);
  } else {
    add_q(e, ap, m, 0, 0, 1.0);
    e.add(r, 0, Pt * m.A, ap.Q, m.P, false, true);
  }
  e.add(r, 0, Pt * m.B, ap.Z, m.P, false, true);
  add_q(e, ap, m, r, r, 1.0);
  e.add_constant(0, 0, -ap.epsilon * MatrixXd::Identity(2 * r, 2 * r));

  if (pb.lifted()) add_clique_side_constraints(pb, m, ap);
  if (ap.rho) e.add(0, 0, block_m(*m.basis), *ap.rho);
  ap.program.add_psd_constraint("stability", std::move(e));
  return ap;
}

AssembledProgram assemble_hinf(const SynthesisProblem& pb,
                               std::optional<double> fixed_gamma) {
  Model m;
  AssembledProgram ap = begin(pb, m);
  const int r = m.r();
  const int mv = static_cast<int>(m.Bv.cols());
  const int l = static_cast<int>(m.C.rows());
  const int d = 2 * r + mv + l;
  const MatrixXd Pt = m.P.transpose();
  const bool ext = is_ext(pb.method.family);
  const MatrixVariable& X = ext ? ap.G : ap.Q;

  // −(Γ or Θ) − εI ⪰ 0, block order [r | r | m_v | l].
  AffineExpression e(d, d);
  add_q(e, ap, m, 0, 0, 1.0);
  e.add(r, 0, -Pt, X, m.A.transpose() * m.P, true, true);
  e.add(r, 0, -Pt, ap.Z, m.B.transpose() * m.P, true, true);
  if (ext) {
    add_q(e, ap, m, r, r, -1.0);
    e.add(r, r, Pt, ap.G, m.P).add(r, r, Pt, ap.G, m.P, true);
  } else {
    add_q(e, ap, m, r, r, 1.0);
  }
  e.add(2 * r + mv, r, -m.C, X, m.P, false, true);
  e.add(2 * r + mv, r, -m.D, ap.Z, m.P, false, true);

  MatrixXd constant = MatrixXd::Zero(d, d);
  constant.block(2 * r, 0, mv, r) = -m.Bv.transpose() * m.P;
  constant.block(0, 2 * r, r, mv) = -m.P.transpose() * m.Bv;
  constant.block(2 * r + mv, 2 * r, l, mv) = -m.Dw;
  constant.block(2 * r, 2 * r + mv, mv, l) = -m.Dw.transpose();
  constant.diagonal().array() -= ap.epsilon;
  if (fixed_gamma) {
    constant.diagonal().tail(mv + l).array() += *fixed_gamma;
  } else {
    ap.gamma = ap.program.add_scalar("gamma");
    MatrixXd sel = MatrixXd::Zero(d, d);
    sel.diagonal().tail(mv + l).setOnes();
    e.add(0, 0, sel, *ap.gamma);
  }
  e.add_constant(0, 0, constant);

  if (pb.lifted()) add_clique_side_constraints(pb, m, ap);
  if (ap.rho) e.add(0, 0, -padded(block_m(*m.basis), d), *ap.rho);
  ap.program.add_psd_constraint("hinf", std::move(e));
  if (ap.gamma) ap.program.minimize(*ap.gamma);
  return ap;
}

namespace {

double lam_min(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Numeric Φ / Ψ (stabilization) or Γ / Θ (H∞) in lifted coordinates.
MatrixXd literal_main(const Model& m, bool ext, bool hinf, const MatrixXd& Q,
                      const MatrixXd& G, const MatrixXd& Z, double gamma) {
  const int s = m.s();
  const MatrixXd X = ext ? G : Q;
  const MatrixXd AX = m.A * X + m.B * Z;
  if (!hinf) {
    MatrixXd out(2 * s, 2 * s);
    out.topLeftCorner(s, s) = ext ? MatrixXd(G + G.transpose() - Q) : Q;
    out.bottomLeftCorner(s, s) = AX;
    out.topRightCorner(s, s) = AX.transpose();
    out.bottomRightCorner(s, s) = Q;
    return out;
  }
  const int mv = static_cast<int>(m.Bv.cols());
  const int l = static_cast<int>(m.C.rows());
  const int d = 2 * s + mv + l;
  MatrixXd out = MatrixXd::Zero(d, d);
  out.block(0, 0, s, s) = -Q;
  out.block(s, 0, s, s) = AX.transpose();
  out.block(0, s, s, s) = AX;
  out.block(s, s, s, s) = ext ? MatrixXd(Q - G - G.transpose()) : MatrixXd(-Q);
  out.block(2 * s, 0, mv, s) = m.Bv.transpose();
  out.block(0, 2 * s, s, mv) = m.Bv;
  out.block(2 * s, 2 * s, mv, mv) = -gamma * MatrixXd::Identity(mv, mv);
  const MatrixXd CX = m.C * X + m.D * Z;
  out.block(2 * s + mv, s, l, s) = CX;
  out.block(s, 2 * s + mv, s, l) = CX.transpose();
  out.block(2 * s + mv, 2 * s, l, mv) = m.Dw;
  out.block(2 * s, 2 * s + mv, mv, l) = m.Dw.transpose();
  out.block(2 * s + mv, 2 * s + mv, l, l) = -gamma * MatrixXd::Identity(l, l);
  return out;
}

// Evaluates the literal clique constraints at the lifted point, searching ρ
// by doubling when the reduced formulation eliminated it.
void check_literal(const SynthesisProblem& pb, const Model& m,
                   SynthesisVariables& vars, double gamma, double eps) {
  const bool ext = pb.method.family == Family::kCliqueExt;
  const bool hinf = pb.hinf();
  const LiftedBasis& b = *m.basis;
  MatrixXd main = literal_main(m, ext, hinf, vars.Q, vars.G, vars.Z, gamma);
  if (hinf) main = -main;
  const MatrixXd Mp = padded(b.M, static_cast<int>(main.rows()));
  const double sign = hinf ? -1.0 : 1.0;  // ρ enters −(Γ + ρM)
  if (!m.has_complement) {
    vars.literal_margin = lam_min(main);
    return;
  }
  if (!vars.rho) {
    const double scale = std::max(1.0, main.cwiseAbs().maxCoeff());
    double best_rho = 0.0;
    double best = lam_min(main);
    for (int k = 0; k <= 60 && best < 0.5 * eps; ++k) {
      const double rho = sign * std::ldexp(scale, k - 10);
      const double v = lam_min(main + sign * rho * Mp);
      if (v > best) {
        best = v;
        best_rho = rho;
      }
    }
    vars.rho = best_rho;
  }
  vars.literal_margin = lam_min(main + sign * *vars.rho * Mp);

  const MatrixXd X = ext ? vars.G : vars.Q;
  const MatrixXd sym_part = b.N * X + X.transpose() * b.N;
  if (!vars.eta) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(b.N);
    std::vector<int> cols;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()(i) > 0.5) cols.push_back(i);
    MatrixXd U(b.lifted_dim(), static_cast<int>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i)
      U.col(static_cast<int>(i)) = es.eigenvectors().col(cols[i]);
    vars.eta = lam_min(U.transpose() * sym_part * U);
  }
  vars.literal_eta_residual = lam_min(sym_part - *vars.eta * b.N);
}

MatrixXd invert_checked(const MatrixXd& X, double rcond_min,
                        const char* what) {
  Eigen::PartialPivLU<MatrixXd> lu(X);
  if (!(lu.rcond() >= rcond_min)) {
    throw SingularBlockError(std::string(what) + " is numerically singular");
  }
  return lu.inverse();
}

}  // namespace

SynthesisResult synthesize(const SynthesisProblem& pb) {
  SynthesisResult res;
  res.family = pb.method.family;
  res.objective = pb.method.objective;

  AssembledProgram ap =
      pb.method.objective == Objective::kStabilize
          ? assemble_stabilization(pb)
          : assemble_hinf(pb, pb.method.objective == Objective::kHinfFeasible
                                  ? std::optional<double>(pb.method.gamma)
                                  : std::nullopt);
  const Model m = build_model(pb);

  res.stats.num_variables = ap.program.num_variables();
  res.stats.num_lmis = static_cast<int>(ap.program.psd_constraints().size());
  const conic::SolveOutcome out = conic::solve(ap.program, pb.numerics.solver);
  res.stats.solve_time_s = out.wall_time_s;
  res.stats.iterations = out.iterations;
  res.stats.solver_status = conic::to_string(out.status);
  res.stats.message = out.message;

  if (out.status == conic::SolveStatus::kInfeasible) {
    res.status = SynthesisStatus::kInfeasible;
    return res;
  }
  if (!out.ok()) {
    res.status = SynthesisStatus::kNumericalFailure;
    return res;
  }

  SynthesisVariables& v = res.variables;
  v.Z = conic::value(ap.Z, out.x);
  v.Q = conic::value(ap.Q, out.x);
  v.Q = 0.5 * (v.Q + v.Q.transpose()).eval();
  if (ap.has_G) v.G = conic::value(ap.G, out.x);
  if (ap.rho) v.rho = conic::value(*ap.rho, out.x);
  if (ap.eta) v.eta = conic::value(*ap.eta, out.x);
  if (ap.q_projected) {
    const MatrixXd V = m.basis->range_basis();
    const double lam = lam_min(v.Q);
    v.Q = V * v.Q * V.transpose() + lam * m.basis->N;
  }
  if (ap.gamma) {
    res.gamma = conic::value(*ap.gamma, out.x);
  } else if (pb.method.objective == Objective::kHinfFeasible) {
    res.gamma = pb.method.gamma;
  }

  try {
    switch (pb.method.family) {
      case Family::kDiag:
        res.K = v.Z * invert_checked(v.Q, pb.numerics.rcond_min, "Q");
        break;
      case Family::kExt:
      case Family::kCentralized:
        res.K = v.Z * invert_checked(v.G, pb.numerics.rcond_min, "G");
        break;
      case Family::kClique:
        res.K = recover_gain(v.Z, v.Q, *m.basis, pb.numerics.rcond_min);
        break;
      case Family::kCliqueExt:
        res.K = recover_gain(v.Z, v.G, *m.basis, pb.numerics.rcond_min);
        break;
    }
  } catch (const SingularBlockError& e) {
    res.status = SynthesisStatus::kNumericalFailure;
    res.stats.message += std::string(" gain recovery failed: ") + e.what();
    return res;
  }

  if (pb.lifted()) {
    check_literal(pb, m, v, res.gamma.value_or(0.0), ap.epsilon);
  }

  res.status = pb.method.objective == Objective::kHinfMinimize
                   ? SynthesisStatus::kOptimal
                   : SynthesisStatus::kFeasible;
  if (!pattern_test(res.K, pb.pattern(), pb.structure, pb.numerics.pattern_tol)) {
    res.status = SynthesisStatus::kNumericalFailure;
    res.stats.message += " recovered gain violates the sparsity pattern";
  } else if (!(spectral_radius(pb.plant.A + pb.plant.B * res.K) < 1.0)) {
    res.status = SynthesisStatus::kNumericalFailure;
    res.stats.message += " recovered gain is not stabilizing";
  }
  return res;
}

SynthesisResult centralized_baseline(const Plant& plant,
                                     const BlockStructure& structure,
                                     Objective objective,
                                     const SynthesisNumerics& numerics) {
  SynthesisProblem pb;
  pb.plant = plant;
  pb.structure = structure;
  pb.graph = Graph::complete(structure.nodes());
  pb.cover = maximal_cliques(pb.graph);
  pb.method.family = Family::kCentralized;
  pb.method.objective = objective;
  pb.numerics = numerics;
  return synthesize(pb);
}

}  // namespace cliquesynth
