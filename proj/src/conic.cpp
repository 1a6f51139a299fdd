#include "cliquesynth/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace cliquesynth::conic {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

// Nonzero pattern of a dense matrix, column-wise and row-wise.
struct Nonzeros {
  std::vector<std::vector<std::pair<int, double>>> by_col;  // col -> (row, v)
  std::vector<std::vector<std::pair<int, double>>> by_row;  // row -> (col, v)
};

Nonzeros nonzeros(const Eigen::MatrixXd& m) {
  Nonzeros nz;
  nz.by_col.resize(m.cols());
  nz.by_row.resize(m.rows());
  for (int c = 0; c < m.cols(); ++c)
    for (int r = 0; r < m.rows(); ++r)
      if (m(r, c) != 0.0) {
        nz.by_col[c].emplace_back(r, m(r, c));
        nz.by_row[r].emplace_back(c, m(r, c));
      }
  return nz;
}

double min_eigenvalue(const Eigen::MatrixXd& s) {
  if (s.rows() == 0) return 0.0;
  if (s.rows() == 1) return s(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

AffineExpression::AffineExpression(int rows, int cols)
    : rows_(rows), cols_(cols), constant_(Eigen::MatrixXd::Zero(rows, cols)) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("AffineExpression: negative size");
  }
}

void AffineExpression::check_block(int r0, int c0, int r, int c) const {
  if (r0 < 0 || c0 < 0 || r0 + r > rows_ || c0 + c > cols_) {
    throw std::out_of_range("AffineExpression: block out of range");
  }
}

void AffineExpression::push(int var, int row, int col, double value, int r0,
                            int c0, bool mirror) {
  if (value == 0.0) return;
  terms_.push_back({var, r0 + row, c0 + col, value});
  if (mirror) terms_.push_back({var, c0 + col, r0 + row, value});
}

AffineExpression& AffineExpression::add(int r0, int c0, const Eigen::MatrixXd& L,
                                        const MatrixVariable& X,
                                        const Eigen::MatrixXd& R,
                                        bool transpose_var, bool mirror) {
  const int inner_rows = transpose_var ? X.cols() : X.rows();
  const int inner_cols = transpose_var ? X.rows() : X.cols();
  if (L.cols() != inner_rows || R.rows() != inner_cols) {
    throw std::invalid_argument("AffineExpression::add: shape mismatch for " +
                                X.name);
  }
  check_block(r0, c0, static_cast<int>(L.rows()), static_cast<int>(R.cols()));
  if (mirror) {
    check_block(c0, r0, static_cast<int>(R.cols()), static_cast<int>(L.rows()));
  }
  const Nonzeros lnz = nonzeros(L);
  const Nonzeros rnz = nonzeros(R);
  for (int p = 0; p < X.rows(); ++p) {
    for (int q = 0; q < X.cols(); ++q) {
      const int idx = X.index(p, q);
      if (idx < 0) continue;
      // Entry (p, q) of X sits at (p, q) of X or at (q, p) of Xᵀ.
      const int a = transpose_var ? q : p;
      const int b = transpose_var ? p : q;
      for (const auto& [row, lv] : lnz.by_col[a])
        for (const auto& [col, rv] : rnz.by_row[b])
          push(idx, row, col, lv * rv, r0, c0, mirror);
    }
  }
  return *this;
}

AffineExpression& AffineExpression::add(int r0, int c0, const MatrixVariable& X,
                                        double scale, bool transpose_var,
                                        bool mirror) {
  const int r = transpose_var ? X.cols() : X.rows();
  const int c = transpose_var ? X.rows() : X.cols();
  check_block(r0, c0, r, c);
  if (mirror) check_block(c0, r0, c, r);
  for (int p = 0; p < X.rows(); ++p)
    for (int q = 0; q < X.cols(); ++q) {
      const int idx = X.index(p, q);
      if (idx < 0) continue;
      if (transpose_var) {
        push(idx, q, p, scale, r0, c0, mirror);
      } else {
        push(idx, p, q, scale, r0, c0, mirror);
      }
    }
  return *this;
}

AffineExpression& AffineExpression::add(int r0, int c0,
                                        const Eigen::MatrixXd& coeff,
                                        const ScalarVariable& s, bool mirror) {
  check_block(r0, c0, static_cast<int>(coeff.rows()),
              static_cast<int>(coeff.cols()));
  if (mirror) {
    check_block(c0, r0, static_cast<int>(coeff.cols()),
                static_cast<int>(coeff.rows()));
  }
  for (int c = 0; c < coeff.cols(); ++c)
    for (int r = 0; r < coeff.rows(); ++r)
      push(s.index, r, c, coeff(r, c), r0, c0, mirror);
  return *this;
}

AffineExpression& AffineExpression::add_constant(int r0, int c0,
                                                 const Eigen::MatrixXd& value,
                                                 bool mirror) {
  check_block(r0, c0, static_cast<int>(value.rows()),
              static_cast<int>(value.cols()));
  constant_.block(r0, c0, value.rows(), value.cols()) += value;
  if (mirror) {
    check_block(c0, r0, static_cast<int>(value.cols()),
                static_cast<int>(value.rows()));
    constant_.block(c0, r0, value.cols(), value.rows()) += value.transpose();
  }
  return *this;
}

Eigen::MatrixXd AffineExpression::evaluate(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd out = constant_;
  for (const Term& t : terms_) out(t.row, t.col) += x(t.var) * t.value;
  return out;
}

MatrixVariable ConicProgram::add_matrix_variable(
    std::string name, const std::vector<int>& row_blocks,
    const std::vector<int>& col_blocks,
    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
    Symmetry symmetry) {
  if (mask.rows() != static_cast<Eigen::Index>(row_blocks.size()) ||
      mask.cols() != static_cast<Eigen::Index>(col_blocks.size())) {
    throw std::invalid_argument("add_matrix_variable: mask shape mismatch");
  }
  std::vector<int> ro(row_blocks.size() + 1, 0), co(col_blocks.size() + 1, 0);
  for (std::size_t i = 0; i < row_blocks.size(); ++i)
    ro[i + 1] = ro[i] + row_blocks[i];
  for (std::size_t j = 0; j < col_blocks.size(); ++j)
    co[j + 1] = co[j] + col_blocks[j];
  if (symmetry == Symmetry::kSymmetric &&
      (row_blocks != col_blocks || (mask != mask.transpose()).any())) {
    throw std::invalid_argument(
        "add_matrix_variable: symmetric variable needs square symmetric "
        "structure");
  }
  MatrixVariable var;
  var.name = std::move(name);
  var.symmetry = symmetry;
  var.index = Eigen::MatrixXi::Constant(ro.back(), co.back(), -1);
  // Declaration order: column-major over entries, upper triangle only for
  // symmetric variables.
  for (int c = 0; c < co.back(); ++c) {
    const int bj = static_cast<int>(
        std::upper_bound(co.begin(), co.end(), c) - co.begin() - 1);
    for (int r = 0; r < ro.back(); ++r) {
      const int bi = static_cast<int>(
          std::upper_bound(ro.begin(), ro.end(), r) - ro.begin() - 1);
      if (!mask(bi, bj)) continue;
      if (symmetry == Symmetry::kSymmetric && r > c) continue;
      var.index(r, c) = num_variables_++;
      if (symmetry == Symmetry::kSymmetric) var.index(c, r) = var.index(r, c);
    }
  }
  matrix_vars_.push_back(var);
  return var;
}

MatrixVariable ConicProgram::add_block_diagonal(
    std::string name, const std::vector<int>& block_sizes, Symmetry symmetry) {
  const int k = static_cast<int>(block_sizes.size());
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(k, k, false);
  for (int i = 0; i < k; ++i) mask(i, i) = true;
  return add_matrix_variable(std::move(name), block_sizes, block_sizes, mask,
                             symmetry);
}

MatrixVariable ConicProgram::add_full(std::string name, int rows, int cols,
                                      Symmetry symmetry) {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(1, 1, true);
  return add_matrix_variable(std::move(name), {rows}, {cols}, mask, symmetry);
}

ScalarVariable ConicProgram::add_scalar(std::string name,
                                        std::optional<double> lower_bound) {
  ScalarVariable s{std::move(name), num_variables_++, lower_bound};
  scalar_vars_.push_back(s);
  return s;
}

void ConicProgram::add_psd_constraint(std::string name, AffineExpression expr) {
  if (expr.rows() != expr.cols()) {
    throw std::invalid_argument("add_psd_constraint: expression not square");
  }
  psd_.emplace_back(std::move(name), std::move(expr));
}

void ConicProgram::add_equality(std::string name, AffineExpression expr) {
  equalities_.emplace_back(std::move(name), std::move(expr));
}

void ConicProgram::minimize(const ScalarVariable& s) {
  c_ = Eigen::VectorXd::Zero(num_variables_);
  c_(s.index) = 1.0;
}

void ConicProgram::set_objective(Eigen::VectorXd c) { c_ = std::move(c); }

CompiledProgram ConicProgram::compile() const {
  CompiledProgram out;
  out.num_variables = num_variables_;
  out.c = Eigen::VectorXd::Zero(num_variables_);
  if (c_.size() > 0) {
    if (c_.size() > num_variables_) {
      throw std::invalid_argument("compile: objective longer than variables");
    }
    out.c.head(c_.size()) = c_;
  }

  for (const auto& [name, expr] : psd_) {
    CompiledLmi lmi;
    lmi.name = name;
    lmi.dim = expr.rows();
    lmi.f0 = expr.constant();
    const double c_scale = lmi.f0.size() ? lmi.f0.cwiseAbs().maxCoeff() : 0.0;
    if (!lmi.f0.isApprox(lmi.f0.transpose(), 0.0) &&
        (lmi.f0 - lmi.f0.transpose()).cwiseAbs().maxCoeff() >
            1e-12 * std::max(1.0, c_scale)) {
      throw std::invalid_argument("compile: constant of '" + name +
                                  "' is not symmetric");
    }
    lmi.f0 = 0.5 * (lmi.f0 + lmi.f0.transpose()).eval();

    std::map<int, std::vector<Eigen::Triplet<double>>> by_var;
    for (const auto& t : expr.terms())
      by_var[t.var].emplace_back(t.row, t.col, t.value);
    for (auto& [var, triplets] : by_var) {
      Eigen::SparseMatrix<double> f(lmi.dim, lmi.dim);
      f.setFromTriplets(triplets.begin(), triplets.end());
      f.prune(0.0);
      if (f.nonZeros() == 0) continue;
      const Eigen::SparseMatrix<double> ft = f.transpose();
      const Eigen::SparseMatrix<double> diff = f - ft;
      const double asym =
          diff.nonZeros() ? diff.coeffs().cwiseAbs().maxCoeff() : 0.0;
      const double scale = f.coeffs().cwiseAbs().maxCoeff();
      if (asym > 1e-12 * std::max(1.0, scale)) {
        throw std::invalid_argument("compile: coefficient of x" +
                                    std::to_string(var) + " in '" + name +
                                    "' is not symmetric");
      }
      Eigen::SparseMatrix<double> sym = 0.5 * (f + ft);
      sym.prune(0.0);
      lmi.coefficients.emplace_back(var, std::move(sym));
    }
    out.lmis.push_back(std::move(lmi));
  }

  for (const ScalarVariable& s : scalar_vars_) {
    if (!s.lower_bound) continue;
    CompiledLmi lmi;
    lmi.name = s.name + ">=lb";
    lmi.dim = 1;
    lmi.f0 = Eigen::MatrixXd::Constant(1, 1, -*s.lower_bound);
    Eigen::SparseMatrix<double> f(1, 1);
    f.insert(0, 0) = 1.0;
    lmi.coefficients.emplace_back(s.index, std::move(f));
    out.lmis.push_back(std::move(lmi));
  }

  std::vector<Eigen::Triplet<double>> eq;
  std::vector<double> rhs;
  int row = 0;
  for (const auto& [name, expr] : equalities_) {
    std::map<std::pair<int, int>, int> entry_row;
    std::vector<std::pair<int, int>> entries;
    for (const auto& t : expr.terms()) {
      auto key = std::make_pair(t.row, t.col);
      auto it = entry_row.find(key);
      if (it == entry_row.end()) {
        it = entry_row.emplace(key, row++).first;
        entries.push_back(key);
      }
      eq.emplace_back(it->second, t.var, t.value);
    }
    for (const auto& [r, c] : entries) rhs.push_back(-expr.constant()(r, c));
    for (int r = 0; r < expr.rows(); ++r)
      for (int c = 0; c < expr.cols(); ++c)
        if (!entry_row.count({r, c}) && expr.constant()(r, c) != 0.0) {
          // A constant-only nonzero entry: 0 = const, an infeasible row.
          rhs.push_back(-expr.constant()(r, c));
          ++row;
        }
  }
  out.a_eq.resize(row, num_variables_);
  out.a_eq.setFromTriplets(eq.begin(), eq.end());
  out.a_eq.prune(0.0);
  out.b_eq = Eigen::Map<Eigen::VectorXd>(rhs.data(),
                                         static_cast<Eigen::Index>(rhs.size()));
  return out;
}

Eigen::MatrixXd value(const MatrixVariable& var, const Eigen::VectorXd& x) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(var.rows(), var.cols());
  for (int r = 0; r < var.rows(); ++r)
    for (int c = 0; c < var.cols(); ++c)
      if (var.index(r, c) >= 0) out(r, c) = x(var.index(r, c));
  return out;
}

double value(const ScalarVariable& var, const Eigen::VectorXd& x) {
  return x(var.index);
}

Eigen::VectorXd pack_symmetric(const Eigen::MatrixXd& S) {
  const int d = static_cast<int>(S.rows());
  Eigen::VectorXd v(d * (d + 1) / 2);
  int k = 0;
  for (int c = 0; c < d; ++c)
    for (int r = 0; r <= c; ++r) v(k++) = (r == c) ? S(r, c) : kSqrt2 * S(r, c);
  return v;
}

Eigen::MatrixXd unpack_symmetric(const Eigen::VectorXd& v, int dim) {
  if (v.size() != dim * (dim + 1) / 2) {
    throw std::invalid_argument("unpack_symmetric: size mismatch");
  }
  Eigen::MatrixXd S(dim, dim);
  int k = 0;
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r <= c; ++r) {
      const double val = (r == c) ? v(k) : v(k) / kSqrt2;
      S(r, c) = val;
      S(c, r) = val;
      ++k;
    }
  return S;
}

namespace {

int packed_index(int r, int c) {
  if (r > c) std::swap(r, c);
  return c * (c + 1) / 2 + r;
}

}  // namespace

StandardForm vectorize(const CompiledProgram& program) {
  StandardForm form;
  form.c = program.c;
  form.a_eq = program.a_eq;
  form.b_eq = program.b_eq;
  for (const CompiledLmi& lmi : program.lmis) {
    StandardForm::Constraint con;
    con.name = lmi.name;
    con.dim = lmi.dim;
    con.f0 = pack_symmetric(lmi.f0);
    std::vector<Eigen::Triplet<double>> trips;
    for (const auto& [var, f] : lmi.coefficients) {
      for (int k = 0; k < f.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(f, k); it; ++it) {
          const int r = static_cast<int>(it.row());
          const int c = static_cast<int>(it.col());
          if (r > c) continue;
          const double scale = (r == c) ? 1.0 : kSqrt2;
          trips.emplace_back(packed_index(r, c), var, scale * it.value());
        }
    }
    con.f.resize(lmi.dim * (lmi.dim + 1) / 2, program.num_variables);
    con.f.setFromTriplets(trips.begin(), trips.end());
    form.constraints.push_back(std::move(con));
  }
  return form;
}

CompiledProgram unpack(const StandardForm& form) {
  CompiledProgram program;
  program.num_variables = static_cast<int>(form.c.size());
  program.c = form.c;
  program.a_eq = form.a_eq;
  program.b_eq = form.b_eq;
  for (const auto& con : form.constraints) {
    CompiledLmi lmi;
    lmi.name = con.name;
    lmi.dim = con.dim;
    lmi.f0 = unpack_symmetric(con.f0, con.dim);
    // Packed index -> (row, col).
    std::vector<std::pair<int, int>> pos(con.f0.size());
    for (int c = 0; c < con.dim; ++c)
      for (int r = 0; r <= c; ++r) pos[packed_index(r, c)] = {r, c};
    for (int var = 0; var < con.f.outerSize(); ++var) {
      std::vector<Eigen::Triplet<double>> trips;
      for (Eigen::SparseMatrix<double>::InnerIterator it(con.f, var); it; ++it) {
        const auto [r, c] = pos[it.row()];
        if (r == c) {
          trips.emplace_back(r, c, it.value());
        } else {
          trips.emplace_back(r, c, it.value() / kSqrt2);
          trips.emplace_back(c, r, it.value() / kSqrt2);
        }
      }
      if (trips.empty()) continue;
      Eigen::SparseMatrix<double> f(con.dim, con.dim);
      f.setFromTriplets(trips.begin(), trips.end());
      lmi.coefficients.emplace_back(var, std::move(f));
    }
    program.lmis.push_back(std::move(lmi));
  }
  return program;
}

void export_sparse_text(const CompiledProgram& program, std::ostream& os) {
  const auto old_precision = os.precision(17);
  os << "* form: minimize c'x s.t. F0 + sum_i x_i F_i >= 0 (PSD), A_eq x = "
        "b_eq\n";
  os << "* variables " << program.num_variables << "\n";
  os << "* blocks " << program.lmis.size();
  for (const auto& lmi : program.lmis) os << ' ' << lmi.dim;
  os << "\n";
  for (int i = 0; i < program.c.size(); ++i)
    if (program.c(i) != 0.0) os << 0 << ' ' << i + 1 << " 1 1 " << program.c(i) << "\n";
  for (std::size_t k = 0; k < program.lmis.size(); ++k) {
    const auto& lmi = program.lmis[k];
    for (int c = 0; c < lmi.dim; ++c)
      for (int r = 0; r <= c; ++r)
        if (lmi.f0(r, c) != 0.0)
          os << k + 1 << " 0 " << r + 1 << ' ' << c + 1 << ' ' << lmi.f0(r, c)
             << "\n";
    for (const auto& [var, f] : lmi.coefficients)
      for (int c = 0; c < f.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(f, c); it; ++it)
          if (it.row() <= it.col())
            os << k + 1 << ' ' << var + 1 << ' ' << it.row() + 1 << ' '
               << it.col() + 1 << ' ' << it.value() << "\n";
  }
  for (int k = 0; k < program.a_eq.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(program.a_eq, k); it;
         ++it)
      os << "* eq " << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value()
         << "\n";
  for (int r = 0; r < program.b_eq.size(); ++r)
    if (program.b_eq(r) != 0.0)
      os << "* eq_rhs " << r + 1 << ' ' << program.b_eq(r) << "\n";
  os.precision(old_precision);
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "Optimal";
    case SolveStatus::kInfeasible:
      return "Infeasible";
    case SolveStatus::kUnbounded:
      return "Unbounded";
    case SolveStatus::kNumericalFailure:
      return "NumericalFailure";
  }
  return "Unknown";
}

std::pair<double, double> constraint_violation(const CompiledProgram& program,
                                               const Eigen::VectorXd& x) {
  double min_eig = std::numeric_limits<double>::infinity();
  for (const auto& lmi : program.lmis) {
    Eigen::MatrixXd s = lmi.f0;
    for (const auto& [var, f] : lmi.coefficients) s += x(var) * f;
    min_eig = std::min(min_eig, min_eigenvalue(s));
  }
  double eq_res = 0.0;
  if (program.a_eq.rows() > 0) {
    eq_res = (program.a_eq * x - program.b_eq).cwiseAbs().maxCoeff();
  }
  if (program.lmis.empty()) min_eig = 0.0;
  return {min_eig, eq_res};
}

SolveOutcome solve(const ConicProgram& program, const SolverOptions& options,
                   const SolverAdapter* adapter) {
  const auto start = std::chrono::steady_clock::now();
  const CompiledProgram compiled = program.compile();
  const SolverAdapter& backend = adapter ? *adapter : default_adapter();
  SolveOutcome outcome = backend.solve(compiled, options);
  if (outcome.status == SolveStatus::kOptimal) {
    const auto [min_eig, eq_res] = constraint_violation(compiled, outcome.x);
    outcome.min_eigenvalue = min_eig;
    outcome.equality_residual = eq_res;
    const double eq_scale =
        1.0 + (compiled.b_eq.size() ? compiled.b_eq.cwiseAbs().maxCoeff() : 0.0);
    if (min_eig < -options.recheck_slack ||
        eq_res > options.recheck_slack * eq_scale) {
      outcome.status = SolveStatus::kNumericalFailure;
      outcome.message += " recheck failed (min eigenvalue " +
                         std::to_string(min_eig) + ", equality residual " +
                         std::to_string(eq_res) + ")";
    }
    outcome.objective = compiled.c.dot(outcome.x);
  }
  outcome.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return outcome;
}

}  // namespace cliquesynth::conic
