#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace cliquesynth::conic {

enum class Symmetry { kSymmetric, kGeneral };

/// Handle to a structured matrix decision variable.
///
/// `index(r, c)` is the position of entry (r, c) in the flattened decision
/// vector, or -1 where the entry is structurally zero. Symmetric variables
/// map (r, c) and (c, r) to the same scalar and own only the upper triangle.
struct MatrixVariable {
  std::string name;
  Symmetry symmetry = Symmetry::kGeneral;
  Eigen::MatrixXi index;

  int rows() const { return static_cast<int>(index.rows()); }
  int cols() const { return static_cast<int>(index.cols()); }
};

struct ScalarVariable {
  std::string name;
  int index = -1;
  std::optional<double> lower_bound;
};

/// rows × cols matrix that is affine in the decision vector x:
///   F₀ + Σᵢ xᵢ Fᵢ.
/// Terms are accumulated block-wise; `mirror` additionally places the
/// transpose of the contribution at the reflected position, which is how the
/// lower-triangular "∗" notation of block LMIs is written down.
class AffineExpression {
 public:
  AffineExpression(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// += L·X·R (or L·Xᵀ·R when `transpose_var`) at block offset (r0, c0).
  AffineExpression& add(int r0, int c0, const Eigen::MatrixXd& L,
                        const MatrixVariable& X, const Eigen::MatrixXd& R,
                        bool transpose_var = false, bool mirror = false);
  /// += X at (r0, c0).
  AffineExpression& add(int r0, int c0, const MatrixVariable& X,
                        double scale = 1.0, bool transpose_var = false,
                        bool mirror = false);
  /// += coeff·s at (r0, c0).
  AffineExpression& add(int r0, int c0, const Eigen::MatrixXd& coeff,
                        const ScalarVariable& s, bool mirror = false);
  AffineExpression& add_constant(int r0, int c0, const Eigen::MatrixXd& value,
                                 bool mirror = false);

  const Eigen::MatrixXd& constant() const { return constant_; }

  struct Term {
    int var;
    int row;
    int col;
    double value;
  };
  const std::vector<Term>& terms() const { return terms_; }

  /// Value at a given decision vector.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;

 private:
  void check_block(int r0, int c0, int r, int c) const;
  void push(int var, int row, int col, double value, int r0, int c0,
            bool mirror);

  int rows_;
  int cols_;
  Eigen::MatrixXd constant_;
  std::vector<Term> terms_;
};

/// Symmetric affine matrix in compiled form (full symmetric storage).
struct CompiledLmi {
  std::string name;
  int dim = 0;
  Eigen::MatrixXd f0;
  std::vector<std::pair<int, Eigen::SparseMatrix<double>>> coefficients;
};

/// Language-neutral program handed to solver adapters:
///   minimize cᵀx  s.t.  F₀ₖ + Σᵢ xᵢ Fᵢₖ ⪰ 0 for every k,  A_eq x = b_eq.
/// Scalar lower bounds appear as trailing 1 × 1 blocks.
struct CompiledProgram {
  int num_variables = 0;
  Eigen::VectorXd c;
  std::vector<CompiledLmi> lmis;
  Eigen::SparseMatrix<double> a_eq;
  Eigen::VectorXd b_eq;
};

/// Block-structured semidefinite program.
class ConicProgram {
 public:
  /// General declaration: a rows × cols matrix partitioned into row_blocks ×
  /// col_blocks, with free blocks marked in `mask`. Symmetric variables must
  /// be square with a symmetric mask.
  MatrixVariable add_matrix_variable(
      std::string name, const std::vector<int>& row_blocks,
      const std::vector<int>& col_blocks,
      const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
      Symmetry symmetry);

  MatrixVariable add_block_diagonal(std::string name,
                                    const std::vector<int>& block_sizes,
                                    Symmetry symmetry);
  MatrixVariable add_full(std::string name, int rows, int cols,
                          Symmetry symmetry);

  ScalarVariable add_scalar(std::string name,
                            std::optional<double> lower_bound = std::nullopt);

  /// expr ⪰ 0. The expression must be square and symmetric.
  void add_psd_constraint(std::string name, AffineExpression expr);
  /// Every entry of expr = 0.
  void add_equality(std::string name, AffineExpression expr);

  void minimize(const ScalarVariable& s);
  void set_objective(Eigen::VectorXd c);

  int num_variables() const { return num_variables_; }
  const Eigen::VectorXd& objective() const { return c_; }
  bool has_objective() const { return c_.size() > 0 && c_.any(); }

  const std::vector<std::pair<std::string, AffineExpression>>& psd_constraints()
      const {
    return psd_;
  }
  const std::vector<std::pair<std::string, AffineExpression>>& equalities()
      const {
    return equalities_;
  }
  const std::vector<MatrixVariable>& matrix_variables() const {
    return matrix_vars_;
  }
  const std::vector<ScalarVariable>& scalar_variables() const {
    return scalar_vars_;
  }

  /// Throws std::invalid_argument when a coefficient matrix is not symmetric.
  CompiledProgram compile() const;

 private:
  int num_variables_ = 0;
  Eigen::VectorXd c_;
  std::vector<MatrixVariable> matrix_vars_;
  std::vector<ScalarVariable> scalar_vars_;
  std::vector<std::pair<std::string, AffineExpression>> psd_;
  std::vector<std::pair<std::string, AffineExpression>> equalities_;
};

/// Value of a matrix variable at x.
Eigen::MatrixXd value(const MatrixVariable& var, const Eigen::VectorXd& x);
double value(const ScalarVariable& var, const Eigen::VectorXd& x);

/// Vectorized standard form. Each symmetric d × d matrix is packed into its
/// upper triangle column by column (d(d+1)/2 entries) with off-diagonal
/// entries scaled by √2, so packed inner products equal trace inner products.
struct StandardForm {
  Eigen::VectorXd c;
  struct Constraint {
    std::string name;
    int dim = 0;
    Eigen::VectorXd f0;
    Eigen::SparseMatrix<double> f;  // packed_dim × num_variables
  };
  std::vector<Constraint> constraints;
  Eigen::SparseMatrix<double> a_eq;
  Eigen::VectorXd b_eq;
};

StandardForm vectorize(const CompiledProgram& program);
CompiledProgram unpack(const StandardForm& form);

Eigen::VectorXd pack_symmetric(const Eigen::MatrixXd& S);
Eigen::MatrixXd unpack_symmetric(const Eigen::VectorXd& v, int dim);

/// Plain-text sparse export for cross-checking with external solvers. Header
/// lines start with '*'; then one line per upper-triangle nonzero:
///   constraint matrix row col value
/// (1-based; matrix 0 is F₀, matrix i is the coefficient of xᵢ). The
/// objective is written as constraint 0 with one line per nonzero cᵢ.
void export_sparse_text(const CompiledProgram& program, std::ostream& os);

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };
const char* to_string(SolveStatus status);

struct SolverOptions {
  double tolerance = 1e-8;
  /// A returned point must satisfy λ_min(Fₖ(x)) ≥ −recheck_slack.
  double recheck_slack = 1e-7;
  int max_iterations = 150;
  bool verbose = false;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  double wall_time_s = 0.0;
  /// Smallest eigenvalue over all constraints at x (recheck).
  double min_eigenvalue = 0.0;
  double equality_residual = 0.0;
  std::string message;

  bool ok() const { return status == SolveStatus::kOptimal; }
};

/// Solver plug-in contract. Adapters receive the compiled program and return
/// a raw outcome; `solve` below normalizes and re-verifies it.
class SolverAdapter {
 public:
  virtual ~SolverAdapter() = default;
  virtual std::string name() const = 0;
  /// Whether one instance may be used from several threads at once.
  virtual bool reentrant() const = 0;
  virtual SolveOutcome solve(const CompiledProgram& program,
                             const SolverOptions& options) const = 0;
};

/// The bundled interior-point adapter.
const SolverAdapter& default_adapter();

/// Compile, delegate, and re-check every constraint at the returned point.
/// An adapter-reported optimum that fails the recheck becomes
/// kNumericalFailure.
SolveOutcome solve(const ConicProgram& program,
                   const SolverOptions& options = {},
                   const SolverAdapter* adapter = nullptr);

/// Recheck helper: smallest eigenvalue over all LMIs and max equality
/// residual at x.
std::pair<double, double> constraint_violation(const CompiledProgram& program,
                                               const Eigen::VectorXd& x);

}  // namespace cliquesynth::conic
