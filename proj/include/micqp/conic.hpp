#pragma once

#include <vector>

#include <Eigen/Dense>

#include "micqp/lp.hpp"
#include "micqp/model.hpp"
#include "micqp/relax.hpp"

namespace micqp {

/// LP over the columns x, plus y0 and y for every cone, linked to x by
/// y - A x = b and y0 - a . x = b0.  Rows E x <= h come first.
struct HostLp {
  lp::LpModel lp;
  std::vector<relax::ConeVarMap> cones;
  int n = 0;  // x occupies columns 0..n-1
};

HostLp build_host_lp(const MicqpInstance& inst);

/// (y0, y) of cone `l` read from LP column values.
double host_y0(const HostLp& host, int l, const Eigen::VectorXd& cols);
Eigen::VectorXd host_y(const HostLp& host, int l, const Eigen::VectorXd& cols);

enum class ConicStatus { Optimal, Infeasible, IterLimit };

const char* to_string(ConicStatus s);

struct ConicOptions {
  double tol = 1e-8;       // accepted cone violation
  int max_rounds = 500;
  double box = 1e6;        // temporary bound on x when the first LP is unbounded
  double lp_primal_tol = 1e-11;
};

struct ConicResult {
  ConicStatus status = ConicStatus::IterLimit;
  Eigen::VectorXd x;
  double obj = -kInf;
  double max_violation = kInf;
  int rounds = 0;
  int cuts = 0;                 // tangent rows added during this call
  bool boxed = false;
  std::vector<double> bounds;   // LP value of every round
};

/// Cutting-plane solver for the continuous relaxation with bounds l <= x <= u.
/// Tangent rows are globally valid, so they are kept between calls.
class ConicSolver {
 public:
  explicit ConicSolver(const MicqpInstance& inst, ConicOptions opts = {});

  ConicResult solve(const Eigen::VectorXd& l, const Eigen::VectorXd& u);
  ConicResult solve();

  int total_cuts() const { return total_cuts_; }
  const ConicOptions& options() const { return opts_; }

 private:
  MicqpInstance inst_;
  ConicOptions opts_;
  HostLp host_;
  std::vector<relax::SepBlock> blocks_;
  int total_cuts_ = 0;
};

ConicResult solve_conic(const MicqpInstance& inst, const Eigen::VectorXd& l,
                        const Eigen::VectorXd& u, ConicOptions opts = {});
ConicResult solve_conic(const MicqpInstance& inst, ConicOptions opts = {});

}  // namespace micqp
