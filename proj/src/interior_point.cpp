#include "cliquesynth/interior_point.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace cliquesynth::conic {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Entry {
  int r;
  int c;
  double v;
};

struct Coef {
  int var;
  std::vector<Entry> entries;  // full symmetric storage
  std::vector<int> cols;       // distinct column indices
};

struct Block {
  int dim = 0;
  MatrixXd f0;
  std::vector<Coef> coefs;
};

struct Reduced {
  std::vector<Block> blocks;
  VectorXd c;
  // y = y0 + Σ_k t_k·scale_k·w_k
  VectorXd y0;
  std::vector<std::vector<std::pair<int, double>>> w;
  VectorXd scale;
  double objective_offset = 0.0;
};

double sym_min_eig(const MatrixXd& m) {
  if (m.rows() == 0) return std::numeric_limits<double>::infinity();
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// y = y0 + W t from a reduced row-echelon form of A_eq. Returns false when
// the equalities are inconsistent.
bool eliminate_equalities(const CompiledProgram& p, VectorXd& y0,
                          std::vector<std::vector<std::pair<int, double>>>& w,
                          std::string& message) {
  const int nv = p.num_variables;
  y0 = VectorXd::Zero(nv);
  w.clear();
  if (p.a_eq.rows() == 0) {
    for (int j = 0; j < nv; ++j) w.push_back({{j, 1.0}});
    return true;
  }
  MatrixXd a = MatrixXd(p.a_eq);
  VectorXd b = p.b_eq;
  const int rows = static_cast<int>(a.rows());
  const double a_scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double b_scale = 1.0 + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  const double pivot_tol = 1e-10 * a_scale;
  std::vector<char> is_pivot(nv, 0);
  std::vector<std::pair<int, int>> pivots;  // (row, col)
  for (int r = 0; r < rows; ++r) {
    int col = -1;
    double best = pivot_tol;
    for (int j = 0; j < nv; ++j) {
      if (is_pivot[j]) continue;
      if (std::abs(a(r, j)) > best) {
        best = std::abs(a(r, j));
        col = j;
      }
    }
    if (col < 0) {
      if (std::abs(b(r)) > 1e-9 * b_scale) {
        message = "inconsistent equality constraints";
        return false;
      }
      a.row(r).setZero();
      b(r) = 0.0;
      continue;
    }
    const double piv = a(r, col);
    a.row(r) /= piv;
    b(r) /= piv;
    for (int s = 0; s < rows; ++s) {
      if (s == r || a(s, col) == 0.0) continue;
      const double f = a(s, col);
      a.row(s) -= f * a.row(r);
      b(s) -= f * b(r);
      a(s, col) = 0.0;
    }
    is_pivot[col] = 1;
    pivots.emplace_back(r, col);
  }
  for (const auto& [r, col] : pivots) y0(col) = b(r);
  for (int j = 0; j < nv; ++j) {
    if (is_pivot[j]) continue;
    std::vector<std::pair<int, double>> column{{j, 1.0}};
    for (const auto& [r, col] : pivots) {
      const double v = a(r, j);
      if (std::abs(v) > 1e-14 * a_scale) column.emplace_back(col, -v);
    }
    w.push_back(std::move(column));
  }
  return true;
}

std::vector<Entry> to_entries(const Eigen::SparseMatrix<double>& f,
                              double drop) {
  std::vector<Entry> out;
  for (int k = 0; k < f.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(f, k); it; ++it)
      if (std::abs(it.value()) > drop)
        out.push_back({static_cast<int>(it.row()), static_cast<int>(it.col()),
                       it.value()});
  return out;
}

void finalize_cols(Coef& coef) {
  coef.cols.clear();
  for (const Entry& e : coef.entries) coef.cols.push_back(e.c);
  std::sort(coef.cols.begin(), coef.cols.end());
  coef.cols.erase(std::unique(coef.cols.begin(), coef.cols.end()),
                  coef.cols.end());
}

// Returns an empty optional-like status: kOptimal means "continue".
SolveStatus presolve(const CompiledProgram& p, double tol, Reduced& red,
                     std::string& message) {
  if (!eliminate_equalities(p, red.y0, red.w, message)) {
    return SolveStatus::kInfeasible;
  }
  const int nt = static_cast<int>(red.w.size());
  red.c = VectorXd::Zero(nt);
  for (int k = 0; k < nt; ++k)
    for (const auto& [i, v] : red.w[k]) red.c(k) += p.c(i) * v;
  red.objective_offset = p.c.dot(red.y0);

  std::vector<double> norm2(nt, 0.0);
  for (const CompiledLmi& lmi : p.lmis) {
    Block blk;
    blk.dim = lmi.dim;
    blk.f0 = lmi.f0;
    std::vector<const Eigen::SparseMatrix<double>*> by_var(p.num_variables,
                                                           nullptr);
    double fscale = lmi.f0.size() ? lmi.f0.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& [var, f] : lmi.coefficients) {
      by_var[var] = &f;
      if (red.y0(var) != 0.0) blk.f0 += red.y0(var) * MatrixXd(f);
      if (f.nonZeros()) fscale = std::max(fscale, f.coeffs().cwiseAbs().maxCoeff());
    }
    const double drop = 1e-15 * std::max(1.0, fscale);
    for (int k = 0; k < nt; ++k) {
      Eigen::SparseMatrix<double> acc(lmi.dim, lmi.dim);
      bool any = false;
      for (const auto& [i, v] : red.w[k]) {
        if (!by_var[i]) continue;
        acc += v * *by_var[i];
        any = true;
      }
      if (!any) continue;
      Coef coef;
      coef.var = k;
      coef.entries = to_entries(acc, drop);
      if (coef.entries.empty()) continue;
      for (const Entry& e : coef.entries) norm2[k] += e.v * e.v;
      blk.coefs.push_back(std::move(coef));
    }
    if (blk.coefs.empty()) {
      const double scale = 1.0 + blk.f0.cwiseAbs().maxCoeff();
      if (sym_min_eig(blk.f0) < -tol * scale) {
        message = "constant constraint '" + lmi.name + "' is not PSD";
        return SolveStatus::kInfeasible;
      }
      continue;
    }
    red.blocks.push_back(std::move(blk));
  }

  red.scale = VectorXd::Ones(nt);
  for (int k = 0; k < nt; ++k) {
    if (norm2[k] == 0.0) {
      if (red.c(k) != 0.0) {
        message = "objective depends on an unconstrained variable";
        return SolveStatus::kUnbounded;
      }
      red.scale(k) = 0.0;
      continue;
    }
    red.scale(k) = 1.0 / std::sqrt(norm2[k]);
  }
  for (Block& blk : red.blocks)
    for (Coef& coef : blk.coefs) {
      for (Entry& e : coef.entries) e.v *= red.scale(coef.var);
      finalize_cols(coef);
    }
  red.c = red.c.cwiseProduct(red.scale);
  return SolveStatus::kOptimal;
}

VectorXd recover_y(const Reduced& red, const VectorXd& t) {
  VectorXd y = red.y0;
  for (int k = 0; k < t.size(); ++k) {
    const double tk = t(k) * red.scale(k);
    if (tk == 0.0) continue;
    for (const auto& [i, v] : red.w[k]) y(i) += v * tk;
  }
  return y;
}

// Σ_j dy_j F_j for one block.
MatrixXd apply_op(const Block& blk, const VectorXd& dy) {
  MatrixXd out = MatrixXd::Zero(blk.dim, blk.dim);
  for (const Coef& coef : blk.coefs) {
    const double s = dy(coef.var);
    if (s == 0.0) continue;
    for (const Entry& e : coef.entries) out(e.r, e.c) += s * e.v;
  }
  return out;
}

double inner(const Coef& coef, const MatrixXd& x) {
  double acc = 0.0;
  for (const Entry& e : coef.entries) acc += e.v * x(e.r, e.c);
  return acc;
}

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Largest α ≤ cap with X + α dX ⪰ 0, given the Cholesky factor of X.
double max_step(const Eigen::LLT<MatrixXd>& chol, const MatrixXd& dx) {
  const int d = static_cast<int>(dx.rows());
  if (d == 1) {
    const double x = chol.matrixL()(0, 0) * chol.matrixL()(0, 0);
    return dx(0, 0) < 0.0 ? -x / dx(0, 0) : std::numeric_limits<double>::infinity();
  }
  MatrixXd m = chol.matrixL().solve(dx);
  m = chol.matrixL().solve(m.transpose()).transpose();
  const double lam = sym_min_eig(sym(m));
  return lam < 0.0 ? -1.0 / lam : std::numeric_limits<double>::infinity();
}

struct Iterate {
  VectorXd y;
  std::vector<MatrixXd> x;
  std::vector<MatrixXd> s;
};

class Solver {
 public:
  Solver(const Reduced& red, const SolverOptions& opt) : red_(red), opt_(opt) {
    nv_ = static_cast<int>(red.c.size());
    total_dim_ = 0;
    f0_norm_ = 0.0;
    for (const Block& b : red.blocks) {
      total_dim_ += b.dim;
      f0_norm_ += b.f0.squaredNorm();
    }
    f0_norm_ = std::sqrt(f0_norm_);
    c_norm_ = red.c.norm();
  }

  SolveStatus run(VectorXd& t, int& iterations, std::string& message);

 private:
  void initial_point(Iterate& it) const;
  bool newton(const Iterate& it, const std::vector<MatrixXd>& sinv,
              const std::vector<MatrixXd>& rp, double sigma_mu, const std::vector<MatrixXd>* corr, VectorXd& dy,
              std::vector<MatrixXd>& ds, std::vector<MatrixXd>& dx) const;

  const Reduced& red_;
  const SolverOptions& opt_;
  int nv_;
  int total_dim_;
  double f0_norm_;
  double c_norm_;
  mutable MatrixXd h_;
  mutable Eigen::LDLT<MatrixXd> ldlt_;
  mutable Eigen::LLT<MatrixXd> llt_;
  mutable bool use_llt_ = true;
};

void Solver::initial_point(Iterate& it) const {
  it.y = VectorXd::Zero(nv_);
  it.x.clear();
  it.s.clear();
  for (const Block& b : red_.blocks) {
    const double d = b.dim;
    double xi = std::max(10.0, std::sqrt(d));
    double zeta = std::max({10.0, std::sqrt(d), b.f0.norm()});
    for (const Coef& coef : b.coefs) {
      double fn = 0.0;
      for (const Entry& e : coef.entries) fn += e.v * e.v;
      fn = std::sqrt(fn);
      xi = std::max(xi, d * (1.0 + std::abs(red_.c(coef.var))) / (1.0 + fn));
      zeta = std::max(zeta, fn);
    }
    it.x.push_back(xi * MatrixXd::Identity(b.dim, b.dim));
    it.s.push_back(zeta * MatrixXd::Identity(b.dim, b.dim));
  }
}

bool Solver::newton(const Iterate& it, const std::vector<MatrixXd>& sinv,
                    const std::vector<MatrixXd>& rp, double sigma_mu, const std::vector<MatrixXd>* corr,
                    VectorXd& dy, std::vector<MatrixXd>& ds,
                    std::vector<MatrixXd>& dx) const {
  const std::size_t nb = red_.blocks.size();
  VectorXd rhs = -red_.c;
  for (std::size_t k = 0; k < nb; ++k) {
    MatrixXd r = sigma_mu * sinv[k] - it.x[k] * rp[k] * sinv[k];
    if (corr) r -= (*corr)[k];
    const MatrixXd rs = sym(r);
    for (const Coef& coef : red_.blocks[k].coefs) rhs(coef.var) += inner(coef, rs);
  }
  const auto factor_solve = [&](const VectorXd& v) -> VectorXd {
    return use_llt_ ? VectorXd(llt_.solve(v)) : VectorXd(ldlt_.solve(v));
  };
  VectorXd sol = factor_solve(rhs);
  // Iterative refinement against the unregularized Schur matrix.
  for (int k = 0; k < 2 && sol.allFinite(); ++k)
    sol += factor_solve(rhs - h_ * sol);
  if (!sol.allFinite()) return false;
  dy = sol;
  ds.resize(nb);
  dx.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    ds[k] = rp[k] + apply_op(red_.blocks[k], dy);
    MatrixXd d = sigma_mu * sinv[k] - it.x[k] - it.x[k] * ds[k] * sinv[k];
    if (corr) d -= (*corr)[k];
    dx[k] = sym(d);
  }
  return true;
}

SolveStatus Solver::run(VectorXd& t, int& iterations, std::string& message) {
  const std::size_t nb = red_.blocks.size();
  Iterate it;
  initial_point(it);
  iterations = 0;
  int stall = 0;
  VectorXd best_y = it.y;
  double best_merit = std::numeric_limits<double>::infinity();
  double best_pinf = 1.0, best_dinf = 1.0, best_gap = 1.0;

  for (int iter = 0; iter < opt_.max_iterations; ++iter) {
    iterations = iter;
    // Residuals.
    std::vector<MatrixXd> rp(nb);
    double rp_norm2 = 0.0, xs = 0.0, dobj = 0.0;
    VectorXd aty = VectorXd::Zero(nv_);
    for (std::size_t k = 0; k < nb; ++k) {
      const Block& b = red_.blocks[k];
      rp[k] = b.f0 + apply_op(b, it.y) - it.s[k];
      rp_norm2 += rp[k].squaredNorm();
      xs += (it.x[k].cwiseProduct(it.s[k])).sum();
      dobj -= (b.f0.cwiseProduct(it.x[k])).sum();
      for (const Coef& coef : b.coefs) aty(coef.var) += inner(coef, it.x[k]);
    }
    const VectorXd rd = red_.c - aty;
    const double pobj = red_.c.dot(it.y);
    const double pinf = std::sqrt(rp_norm2) / (1.0 + f0_norm_);
    const double dinf = rd.norm() / (1.0 + c_norm_);
    const double denom = 1.0 + std::abs(pobj) + std::abs(dobj);
    const double relgap = xs / denom;
    const double mu = xs / total_dim_;

    if (opt_.verbose) {
      std::ostringstream os;
      os << "iter " << iter << " pobj " << pobj << " dobj " << dobj << " pinf "
         << pinf << " dinf " << dinf << " gap " << relgap << " |y| "
         << it.y.norm() << " |x| " << it.x[0].norm() << "\n";
      message += os.str();
    }

    // Among nearly feasible iterates prefer the smallest gap.
    const bool near = pinf < 1e-6 && dinf < 1e-3;
    const double merit = near ? relgap - 1.0 : std::max({pinf, dinf, relgap});
    if (merit < best_merit) {
      best_merit = merit;
      best_y = it.y;
      best_pinf = pinf;
      best_dinf = dinf;
      best_gap = relgap;
    }
    if (pinf < opt_.tolerance && dinf < opt_.tolerance &&
        relgap < opt_.tolerance) {
      t = it.y;
      return SolveStatus::kOptimal;
    }
    // Farkas certificate for primal infeasibility: X/τ with ⟨F₀, X/τ⟩ = −1
    // and A*(X/τ) ≈ 0.
    if (dobj > 0.0) {
      const double ratio = aty.norm() / dobj;
      if (ratio < opt_.tolerance) {
        message += "primal infeasibility certificate found";
        return SolveStatus::kInfeasible;
      }
    }
    // Improving ray for the primal: A(y) ⪰ 0 with cᵀy → −∞.
    if (pobj < -1e8 * (1.0 + f0_norm_ + c_norm_)) {
      double lam = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < nb; ++k)
        lam = std::min(lam, sym_min_eig(sym(apply_op(red_.blocks[k], it.y))));
      if (lam / -pobj > -opt_.tolerance) {
        message += "primal objective unbounded below";
        return SolveStatus::kUnbounded;
      }
    }

    // Factorizations.
    std::vector<MatrixXd> sinv(nb);
    std::vector<Eigen::LLT<MatrixXd>> xchol(nb), schol(nb);
    bool ok = true;
    for (std::size_t k = 0; k < nb; ++k) {
      schol[k].compute(it.s[k]);
      xchol[k].compute(it.x[k]);
      if (schol[k].info() != Eigen::Success || xchol[k].info() != Eigen::Success) {
        ok = false;
        break;
      }
      sinv[k] = schol[k].solve(MatrixXd::Identity(it.s[k].rows(), it.s[k].cols()));
      sinv[k] = sym(sinv[k]);
    }
    if (!ok) {
      message += "iterate lost positive definiteness";
      break;
    }

    // Schur complement H_ij = tr(F_i X F_j S⁻¹).
    MatrixXd h = MatrixXd::Zero(nv_, nv_);
    for (std::size_t k = 0; k < nb; ++k) {
      const Block& b = red_.blocks[k];
      const MatrixXd& x = it.x[k];
      const MatrixXd& si = sinv[k];
      const int d = b.dim;
      for (std::size_t jj = 0; jj < b.coefs.size(); ++jj) {
        const Coef& fj = b.coefs[jj];
        const int nc = static_cast<int>(fj.cols.size());
        // XF restricted to the nonzero columns of F_j.
        MatrixXd xf = MatrixXd::Zero(d, nc);
        for (const Entry& e : fj.entries) {
          const int pos = static_cast<int>(
              std::lower_bound(fj.cols.begin(), fj.cols.end(), e.c) -
              fj.cols.begin());
          xf.col(pos) += e.v * x.col(e.r);
        }
        MatrixXd srows(nc, d);
        for (int q = 0; q < nc; ++q) srows.row(q) = si.row(fj.cols[q]);
        const MatrixXd g = xf * srows;
        for (std::size_t ii = jj; ii < b.coefs.size(); ++ii) {
          const Coef& fi = b.coefs[ii];
          double acc = 0.0;
          for (const Entry& e : fi.entries) acc += e.v * g(e.c, e.r);
          h(fi.var, fj.var) += acc;
          if (ii != jj) h(fj.var, fi.var) += acc;
        }
      }
    }
    h = sym(h);
    h_ = h;
    use_llt_ = true;
    llt_.compute(h);
    if (llt_.info() != Eigen::Success) {
      const double diag = std::max(1e-300, h.diagonal().cwiseAbs().maxCoeff());
      bool fixed = false;
      for (double reg = 1e-14; reg <= 1e-6; reg *= 100.0) {
        MatrixXd hr = h;
        hr.diagonal().array() += reg * diag;
        llt_.compute(hr);
        if (llt_.info() == Eigen::Success) {
          fixed = true;
          break;
        }
      }
      if (!fixed) {
        use_llt_ = false;
        ldlt_.compute(h);
        if (ldlt_.info() != Eigen::Success) {
          message += "Schur complement factorization failed";
          break;
        }
      }
    }

    // Predictor.
    VectorXd dy;
    std::vector<MatrixXd> ds, dx;
    if (!newton(it, sinv, rp, 0.0, nullptr, dy, ds, dx)) {
      message += "non-finite search direction";
      break;
    }
    double ap = std::numeric_limits<double>::infinity();
    double ad = ap;
    for (std::size_t k = 0; k < nb; ++k) {
      ap = std::min(ap, max_step(schol[k], ds[k]));
      ad = std::min(ad, max_step(xchol[k], dx[k]));
    }
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xs_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k)
      xs_aff += ((it.x[k] + ad * dx[k]).cwiseProduct(it.s[k] + ap * ds[k])).sum();
    const double mu_aff = xs_aff / total_dim_;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    std::vector<MatrixXd> corr(nb);
    for (std::size_t k = 0; k < nb; ++k) corr[k] = dx[k] * ds[k] * sinv[k];
    const double step_factor = 0.9 + 0.09 * std::min(ap, ad);
    if (!newton(it, sinv, rp, sigma * mu, &corr, dy, ds, dx)) {
      message += "non-finite search direction";
      break;
    }
    ap = std::numeric_limits<double>::infinity();
    ad = ap;
    for (std::size_t k = 0; k < nb; ++k) {
      ap = std::min(ap, max_step(schol[k], ds[k]));
      ad = std::min(ad, max_step(xchol[k], dx[k]));
    }
    ap = std::min(1.0, step_factor * ap);
    ad = std::min(1.0, step_factor * ad);

    if (opt_.verbose) {
      std::ostringstream os;
      os << "  steps " << ap << " " << ad << " sigma " << sigma << "\n";
      message += os.str();
    }
    it.y += ap * dy;
    for (std::size_t k = 0; k < nb; ++k) {
      it.s[k] = sym(it.s[k] + ap * ds[k]);
      it.x[k] = sym(it.x[k] + ad * dx[k]);
    }
    if (std::max(ap, ad) < 1e-9) {
      if (++stall >= 3) {
        message += "step length stagnated";
        break;
      }
    } else {
      stall = 0;
    }
    iterations = iter + 1;
  }

  if (opt_.verbose) {
    std::ostringstream os;
    os << "best pinf " << best_pinf << " dinf " << best_dinf << " gap "
       << best_gap << "\n";
    message += os.str();
  }
  // Accept a slightly less accurate point rather than failing outright; the
  // caller re-verifies feasibility independently.
  if (best_pinf < 1e-6 && best_dinf < 1e-3 && best_gap < 1e-5) {
    t = best_y;
    message += " (reduced accuracy)";
    return SolveStatus::kOptimal;
  }
  t = best_y;
  if (message.empty()) message = "iteration limit reached";
  return SolveStatus::kNumericalFailure;
}

}  // namespace

SolveOutcome InteriorPointAdapter::solve(const CompiledProgram& program,
                                         const SolverOptions& options) const {
  const auto start = std::chrono::steady_clock::now();
  SolveOutcome out;
  Reduced red;
  std::string message;
  SolveStatus status = presolve(program, options.tolerance, red, message);
  if (status == SolveStatus::kOptimal) {
    VectorXd t = VectorXd::Zero(red.c.size());
    if (!red.blocks.empty()) {
      Solver solver(red, options);
      status = solver.run(t, out.iterations, message);
    } else if (red.c.cwiseAbs().maxCoeff() > 0.0) {
      status = SolveStatus::kUnbounded;
      message = "objective is unconstrained";
    }
    out.x = recover_y(red, t);
  }
  out.status = status;
  out.message = message;
  if (out.x.size() == program.num_variables) out.objective = program.c.dot(out.x);
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

const SolverAdapter& default_adapter() {
  static const InteriorPointAdapter adapter;
  return adapter;
}

}  // namespace cliquesynth::conic
