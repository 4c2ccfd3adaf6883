#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "micqp/error.hpp"

namespace micqp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One conic constraint ||A x + b||_2 <= a . x + b0 with d = rows(A).
struct ConeBlock {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd a;
  double b0 = 0.0;

  int dim() const { return static_cast<int>(A.rows()); }

  /// y = A x + b
  Eigen::VectorXd lhs(const Eigen::VectorXd& x) const { return A * x + b; }
  /// y0 = a . x + b0
  double rhs(const Eigen::VectorXd& x) const { return a.dot(x) + b0; }

  friend bool operator==(const ConeBlock& l, const ConeBlock& r);
};

/// max c.x  s.t.  E x <= h,  cones,  lb <= x <= ub,  x_j integer for j in int_vars.
///
/// Minimization inputs are negated at read time; `minimize_input` remembers
/// the original sense so that reporting and serialization can undo it.
struct MicqpInstance {
  int n = 0;
  Eigen::VectorXd c;
  Eigen::MatrixXd E;  // m x n
  Eigen::VectorXd h;
  std::vector<ConeBlock> cones;
  std::vector<int> int_vars;  // sorted, unique
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
  bool minimize_input = false;
  std::map<std::string, std::string> meta;

  int num_rows() const { return static_cast<int>(E.rows()); }
  int num_cones() const { return static_cast<int>(cones.size()); }
  bool is_integer(int j) const;

  /// Throws DimensionError / DomainError naming the offending field.
  void validate() const;

  /// Objective in the caller's original sense.
  double reported_objective(double internal) const {
    return minimize_input ? -internal : internal;
  }

  /// Field-by-field, floats compared exactly.
  friend bool operator==(const MicqpInstance& l, const MicqpInstance& r);
};

/// Empty instance with n free continuous variables and zero objective.
MicqpInstance make_instance(int n);

/// Append the row coeffs . x <= rhs.
void add_row(MicqpInstance& inst, const Eigen::VectorXd& coeffs, double rhs);

/// Append a variable (column) and return its index.  Existing cones and rows
/// get a zero coefficient for it.
int add_var(MicqpInstance& inst, double lb, double ub, double obj = 0.0,
            bool integer = false);

enum class SolveStatus { Optimal, Infeasible, Unbounded, TimeLimit, IterLimit };

const char* to_string(SolveStatus s);
SolveStatus status_from_string(const std::string& s);

struct Solution {
  Eigen::VectorXd x;
  double objective = -kInf;
  SolveStatus status = SolveStatus::Infeasible;
};

MicqpInstance read_instance(const std::filesystem::path& path);
void write_instance(const MicqpInstance& inst, const std::filesystem::path& path);
MicqpInstance parse_instance(const std::string& json_text);
std::string format_instance(const MicqpInstance& inst);

/// max_l ||A^l x + b^l||^2 - (a^l . x + b0^l)^2, reported raw (may be
/// negative).  Returns -inf when there are no cones.
double max_cone_violation(const MicqpInstance& inst, const Eigen::VectorXd& x);

/// Cone membership test used by the solvers: violation <= tol and every
/// right-hand side a.x + b0 >= -tol.
bool cones_satisfied(const MicqpInstance& inst, const Eigen::VectorXd& x,
                     double tol);

/// Largest |x_j - round(x_j)| over the integer variables.
double max_integrality_gap(const MicqpInstance& inst, const Eigen::VectorXd& x);

}  // namespace micqp
