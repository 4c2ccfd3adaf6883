#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "micqp/conic.hpp"
#include "micqp/model.hpp"
#include "micqp/relax.hpp"

namespace micqp::bnb {

/// What happens at an integral node whose LP point violates a cone.
enum class RefineStrategy { BranchBased, CutBased };

/// Relaxation refined by cuts: separable tangents or flat gradient rows.
enum class DynamicKind { Separable, Flat };

const char* to_string(RefineStrategy s);
const char* to_string(DynamicKind k);

struct Limits {
  double time_limit = 60.0;  // seconds; <= 0 disables
  long max_nodes = 0;        // 0 disables
  long max_cuts = 0;         // 0 disables
};

struct Options {
  Limits limits;
  double int_tol = 1e-6;
  double cone_tol = 1e-6;  // on ||y||^2 - y0^2, plus y0 >= -cone_tol
  double gap_tol = 1e-7;   // relative; a node is fathomed when NB <= LB + gap_tol * max(1, |LB|)
  bool prune = true;       // false keeps every node regardless of its bound
  std::ostream* trace = nullptr;  // one JSON object per line
  ConicOptions conic;
};

struct Stats {
  long nodes = 0;
  long cuts = 0;
  long lp_solves = 0;
  long conic_solves = 0;
  long gamma_growth = 0;  // tangent rows added to separable pools
  double time_s = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = -kInf;  // incumbent value, maximization sense
  double bound = kInf;       // best proven upper bound
  Eigen::VectorXd x;         // incumbent; empty when none was found
  Stats stats;
  double max_violation = -kInf;

  bool has_incumbent() const { return x.size() > 0; }
  Solution solution() const;
};

/// Basic outer approximation: repeatedly solve the MILP over flat rows by
/// LP-based branch-and-bound and add one gradient row per violated cone.
SolveResult solve_oa(const MicqpInstance& inst, const std::vector<relax::OmegaPool>& initial,
                     const Options& opts = {});
/// Same with +-e_j as the initial directions of every cone.
SolveResult solve_oa(const MicqpInstance& inst, const Options& opts = {});

struct LiftedConfig {
  double eps = 0.01;  // quality of the static relaxation
  RefineStrategy strategy = RefineStrategy::CutBased;
  bool use_static = true;
  DynamicKind dynamic = DynamicKind::Separable;
};

/// Lifted LP-based branch-and-bound over static and dynamic relaxation rows.
SolveResult solve_lifted(const MicqpInstance& inst, const LiftedConfig& cfg, const Options& opts = {});
SolveResult solve_lifted(const MicqpInstance& inst, double eps, RefineStrategy strategy, bool use_static,
                         const Options& opts = {});

/// Most fractional integer variable, ties to the lowest index.  Throws
/// NoFractional when every integer variable is within `tol` of an integer.
int branch_variable_selection(const Eigen::VectorXd& x, const std::vector<int>& int_vars, double tol = 1e-6);

}  // namespace micqp::bnb
