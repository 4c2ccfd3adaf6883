#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "micqp/model.hpp"

namespace micqp::lp {

enum class Relation { LessEq, Equal, GreaterEq };

enum class LpStatus { Optimal, PrimalInfeasible, Unbounded };

const char* to_string(LpStatus s);

struct SparseEntry {
  int index;
  double value;
};

struct Row {
  std::vector<SparseEntry> coeffs;
  Relation relation = Relation::LessEq;
  double rhs = 0.0;
};

struct LpResult {
  LpStatus status = LpStatus::PrimalInfeasible;
  Eigen::VectorXd x;  // structural columns only
  double obj = 0.0;
  int iterations = 0;
};

struct LpOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-9;
  int refactor_every = 50;
  int max_iterations = 0;  // 0 = automatic
};

/// Bounded-variable LP  max obj.x  s.t. rows, col_lb <= x <= col_ub.
///
/// Rows are stored as a.x - s = 0 with the logical s bounded by the row's
/// relation, so every variable carries explicit (possibly infinite) bounds.
/// The model keeps its last basis: after add_rows / set_var_bounds the next
/// solve() restarts from it, normally through the dual simplex.
class LpModel {
 public:
  LpModel() = default;

  int num_cols() const { return static_cast<int>(col_lb_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }

  int add_col(double lb, double ub, double obj = 0.0);
  int add_row(std::span<const SparseEntry> coeffs, Relation rel, double rhs);
  int add_row(const Row& row) { return add_row(row.coeffs, row.relation, row.rhs); }
  void add_rows(std::span<const Row> rows);

  void set_var_bounds(int j, double lb, double ub);
  void set_objective(int j, double c);
  void set_objective(const Eigen::VectorXd& c);

  double col_lb(int j) const { return col_lb_.at(static_cast<std::size_t>(j)); }
  double col_ub(int j) const { return col_ub_.at(static_cast<std::size_t>(j)); }
  double objective(int j) const { return obj_.at(static_cast<std::size_t>(j)); }
  const Row& row(int i) const { return rows_.at(static_cast<std::size_t>(i)); }

  /// Forget the stored basis; the next solve starts from the all-logical basis.
  void reset_basis();
  bool has_basis() const { return !basis_.empty(); }

  LpResult solve(const LpOptions& opts = {});

  /// Plain-text listing for inspection.
  void dump(std::ostream& os) const;

 private:
  enum class NbState : unsigned char { Basic, AtLower, AtUpper, Free, Fixed };

  // Variable k < n is a structural column, k >= n is the logical of row k - n.
  int nvars() const { return num_cols() + num_rows(); }
  double lower(int k) const;
  double upper(int k) const;
  double cost(int k) const;  // minimization cost = -obj
  // Multiply by column k of [A -I].
  template <typename F>
  void for_column(int k, F&& f) const;

  void ensure_basis();
  void extend_basis_for_new_rows();
  NbState default_state(int k) const;
  void place_nonbasic(int k);
  void refactor();
  void compute_basic_values();
  // Largest relative violation of a.x - s = 0 over the rows at the current values.
  double row_residual() const;
  // Recompute basic values; refactor first when they no longer satisfy the rows.
  void refresh_values(const LpOptions& opts);
  void compute_duals(std::span<const double> basic_cost, Eigen::VectorXd& y) const;
  double reduced_cost(int k, const Eigen::VectorXd& y, std::span<const double> costs) const;
  Eigen::VectorXd ftran(int k) const;
  void pivot(int r, int q, const Eigen::VectorXd& alpha);

  double primal_infeasibility(int r) const;
  bool primal_feasible(double tol) const;
  bool make_dual_feasible(double tol);

  enum class Phase { Done, Infeasible, Unbounded, Continue };
  Phase primal_iterate(bool phase_one, bool bland, const LpOptions& opts, bool& degenerate);
  Phase dual_iterate(bool bland, const LpOptions& opts, bool& degenerate);
  void check_rows_valid() const;

  std::vector<double> col_lb_, col_ub_, obj_;
  std::vector<Row> rows_;
  std::vector<std::vector<SparseEntry>> cols_;  // column-wise copy of the rows

  // Basis
  std::vector<int> basis_;          // basis position -> variable
  std::vector<int> position_;       // variable -> basis position or -1
  std::vector<NbState> state_;      // per variable
  std::vector<double> value_;       // per variable
  Eigen::MatrixXd binv_;            // explicit inverse of the basis matrix
  int rows_in_basis_ = 0;           // rows covered by the factorization
  int pivots_since_refactor_ = 0;
  bool values_stale_ = true;
};

}  // namespace micqp::lp
