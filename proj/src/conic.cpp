#include "micqp/conic.hpp"

#include <algorithm>
#include <cmath>

namespace micqp {

using lp::LpStatus;
using lp::Relation;
using lp::SparseEntry;

HostLp build_host_lp(const MicqpInstance& inst) {
  inst.validate();
  HostLp host;
  host.n = inst.n;
  for (int j = 0; j < inst.n; ++j) host.lp.add_col(inst.lb[j], inst.ub[j], inst.c[j]);
  for (int i = 0; i < inst.num_rows(); ++i) {
    std::vector<SparseEntry> row;
    for (int j = 0; j < inst.n; ++j)
      if (inst.E(i, j) != 0.0) row.push_back({j, inst.E(i, j)});
    host.lp.add_row(row, Relation::LessEq, inst.h[i]);
  }
  for (const auto& cone : inst.cones) {
    auto map = relax::add_cone_columns(host.lp, cone.dim());
    for (int r = 0; r < cone.dim(); ++r) {
      std::vector<SparseEntry> row{{map.y_cols[static_cast<std::size_t>(r)], 1.0}};
      for (int j = 0; j < inst.n; ++j)
        if (cone.A(r, j) != 0.0) row.push_back({j, -cone.A(r, j)});
      host.lp.add_row(row, Relation::Equal, cone.b[r]);
    }
    std::vector<SparseEntry> row{{map.y0_col, 1.0}};
    for (int j = 0; j < inst.n; ++j)
      if (cone.a[j] != 0.0) row.push_back({j, -cone.a[j]});
    host.lp.add_row(row, Relation::Equal, cone.b0);
    host.cones.push_back(std::move(map));
  }
  return host;
}

double host_y0(const HostLp& host, int l, const Eigen::VectorXd& cols) {
  return cols[host.cones.at(static_cast<std::size_t>(l)).y0_col];
}

Eigen::VectorXd host_y(const HostLp& host, int l, const Eigen::VectorXd& cols) {
  const auto& map = host.cones.at(static_cast<std::size_t>(l));
  Eigen::VectorXd y(map.dim());
  for (int j = 0; j < map.dim(); ++j) y[j] = cols[map.y_cols[static_cast<std::size_t>(j)]];
  return y;
}

const char* to_string(ConicStatus s) {
  switch (s) {
    case ConicStatus::Optimal: return "Optimal";
    case ConicStatus::Infeasible: return "Infeasible";
    case ConicStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

ConicSolver::ConicSolver(const MicqpInstance& inst, ConicOptions opts)
    : inst_(inst), opts_(opts), host_(build_host_lp(inst)) {
  for (const auto& map : host_.cones)
    blocks_.push_back(relax::attach_sep(host_.lp, map, relax::GammaPool::uniform(map.dim(), {-1.0, 1.0})));
}

ConicResult ConicSolver::solve() { return solve(inst_.lb, inst_.ub); }

ConicResult ConicSolver::solve(const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  const int n = inst_.n;
  if (l.size() != n || u.size() != n) throw DimensionError("ConicSolver::solve: bound vectors must have length n");
  ConicResult res;
  for (int j = 0; j < n; ++j) {
    if (std::isnan(l[j]) || std::isnan(u[j])) throw DomainError("ConicSolver::solve: NaN bound");
    if (l[j] > u[j]) {
      res.status = ConicStatus::Infeasible;
      return res;
    }
  }
  for (int j = 0; j < n; ++j) host_.lp.set_var_bounds(j, l[j], u[j]);

  auto apply_box = [&] {
    res.boxed = true;
    for (int j = 0; j < n; ++j)
      host_.lp.set_var_bounds(j, std::max(l[j], -opts_.box), std::min(u[j], opts_.box));
  };
  auto box_active = [&](const Eigen::VectorXd& x) {
    for (int j = 0; j < n; ++j)
      if ((std::isinf(l[j]) && x[j] <= -opts_.box * (1 - 1e-9)) || (std::isinf(u[j]) && x[j] >= opts_.box * (1 - 1e-9)))
        return true;
    return false;
  };

  lp::LpOptions lp_opts;
  lp_opts.primal_tol = opts_.lp_primal_tol;
  Eigen::VectorXd cols;
  while (res.rounds < opts_.max_rounds) {
    lp::LpResult r = host_.lp.solve(lp_opts);
    ++res.rounds;
    if (r.status == LpStatus::PrimalInfeasible) {
      res.status = ConicStatus::Infeasible;
      break;
    }
    if (r.status == LpStatus::Unbounded) {
      if (res.boxed) throw NumericalFailure("ConicSolver: LP unbounded inside the box");
      apply_box();
      continue;
    }
    cols = r.x;
    res.x = cols.head(n);
    res.obj = r.obj;
    res.bounds.push_back(r.obj);
    res.max_violation = max_cone_violation(inst_, res.x);
    if (cones_satisfied(inst_, res.x, opts_.tol)) {
      res.status = box_active(res.x) ? ConicStatus::IterLimit : ConicStatus::Optimal;
      break;
    }
    int added = 0;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      auto& blk = blocks_[l];
      const auto& cone = inst_.cones[l];
      const double y0 = cone.rhs(res.x);
      const Eigen::VectorXd y = cone.lhs(res.x);
      const int d = blk.map.dim();
      Eigen::VectorXd w(d);
      for (int j = 0; j < d; ++j) w[j] = cols[blk.map.aux_cols[static_cast<std::size_t>(j)]];
      const double viol = y.squaredNorm() - y0 * y0;
      if (viol <= opts_.tol && y0 >= -opts_.tol) continue;
      const double sep_tol = 0.1 * opts_.tol / (d * std::max(1.0, std::abs(y0)));
      for (const auto& c : relax::separate_sep(y0, y, w, sep_tol))
        if (relax::add_sep_cut(host_.lp, blk, c.j, c.gamma) >= 0) ++added;
    }
    res.cuts += added;
    total_cuts_ += added;
    if (added == 0) break;  // no progress possible at this accuracy
  }
  for (int j = 0; j < n; ++j) host_.lp.set_var_bounds(j, inst_.lb[j], inst_.ub[j]);
  return res;
}

ConicResult solve_conic(const MicqpInstance& inst, const Eigen::VectorXd& l, const Eigen::VectorXd& u,
                        ConicOptions opts) {
  ConicSolver s(inst, opts);
  return s.solve(l, u);
}

ConicResult solve_conic(const MicqpInstance& inst, ConicOptions opts) {
  return solve_conic(inst, inst.lb, inst.ub, opts);
}

}  // namespace micqp
