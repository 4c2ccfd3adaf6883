#include "micqp/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>

#include <json.hpp>

namespace micqp::bnb {

using lp::LpStatus;
using lp::Relation;
using relax::ConeVarMap;
using relax::OmegaPool;

const char* to_string(RefineStrategy s) {
  return s == RefineStrategy::BranchBased ? "branch" : "cut";
}

const char* to_string(DynamicKind k) { return k == DynamicKind::Separable ? "separable" : "flat"; }

Solution SolveResult::solution() const {
  Solution s;
  s.x = x;
  s.objective = objective;
  s.status = status;
  return s;
}

int branch_variable_selection(const Eigen::VectorXd& x, const std::vector<int>& int_vars, double tol) {
  int best = -1;
  double best_frac = tol;
  for (int j : int_vars) {
    if (j < 0 || j >= x.size()) throw IndexError("branch_variable_selection: index out of range");
    const double frac = std::abs(x[j] - std::round(x[j]));
    if (frac > best_frac) {
      best_frac = frac;
      best = j;
    }
  }
  if (best < 0) throw NoFractional("branch_variable_selection: no fractional integer variable");
  return best;
}

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

struct Node {
  Eigen::VectorXd l, u;
  double nb = kInf;
  long id = 0;
  long parent = -1;
  long seq = 0;
  int depth = 0;
};

// max-heap on NB, FIFO among equal NB
struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.nb != b.nb) return a.nb < b.nb;
    return a.seq > b.seq;
  }
};

int most_fractional(const Eigen::VectorXd& x, const std::vector<int>& I, double tol) {
  try {
    return branch_variable_selection(x, I, tol);
  } catch (const NoFractional&) {
    return -1;
  }
}

json num(double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); }

enum class Stop { None, Time, Nodes, Cuts };

struct TreeOutcome {
  SolveStatus status = SolveStatus::Infeasible;
  double lb = -kInf;
  double bound = kInf;
  Eigen::VectorXd x;
};

class Engine {
 public:
  Engine(const MicqpInstance& inst, const Options& opts)
      : inst_(inst), opts_(opts), host_(build_host_lp(inst)), start_(Clock::now()) {}

  void attach_flat(const std::vector<OmegaPool>& pools) {
    if (pools.size() != host_.cones.size()) throw DimensionError("solve_oa: one direction pool per cone required");
    flat_ = true;
    for (std::size_t l = 0; l < pools.size(); ++l) {
      flat_pools_.push_back(OmegaPool(host_.cones[l].dim()));
      for (const auto& w : pools[l].directions()) add_flat(l, w);
    }
  }

  void attach_lifted(const LiftedConfig& cfg) {
    cfg_ = cfg;
    if (cfg.use_static && !(cfg.eps > 0.0 && cfg.eps < 0.5))
      throw DomainError("solve_lifted: eps must lie in (0, 1/2)");
    for (std::size_t l = 0; l < host_.cones.size(); ++l) {
      const auto& map = host_.cones[l];
      const int d = map.dim();
      if (cfg.use_static) {
        if (d >= 2) {
          relax::attach_lifted_eps(host_.lp, map, cfg.eps);
        } else {
          host_.lp.add_row(std::vector<lp::SparseEntry>{{map.y_cols[0], 1.0}, {map.y0_col, -1.0}}, Relation::LessEq, 0.0);
          host_.lp.add_row(std::vector<lp::SparseEntry>{{map.y_cols[0], -1.0}, {map.y0_col, -1.0}}, Relation::LessEq, 0.0);
        }
      }
      if (cfg.dynamic == DynamicKind::Separable) {
        const auto init = cfg.use_static ? relax::GammaPool(d) : relax::GammaPool::uniform(d, {-1.0, 1.0});
        sep_.push_back(relax::attach_sep(host_.lp, map, init));
      } else {
        flat_ = true;
        flat_pools_.push_back(OmegaPool(d));
        if (!cfg.use_static) {
          const auto axes = OmegaPool::axes(d);
          for (const auto& w : axes.directions()) add_flat(l, w);
        }
      }
    }
  }

  // Gradient rows for every violated cone at x.  Returns rows added.
  int separate_flat_at(const Eigen::VectorXd& x) {
    int added = 0;
    for (std::size_t l = 0; l < inst_.cones.size(); ++l) {
      const auto& cone = inst_.cones[l];
      const double y0 = cone.rhs(x);
      const Eigen::VectorXd y = cone.lhs(x);
      if (!cone_violated(y0, y)) continue;
      const double tol = 0.1 * opts_.cone_tol / std::max(1.0, y.norm() + std::abs(y0));
      for (const auto& c : relax::separate_flat(y0, y, tol))
        if (add_flat(l, c.omega)) ++added;
    }
    stats.cuts += added;
    return added;
  }

  // Separable tangents for every violated cone at LP column values.
  int separate_sep_at(const Eigen::VectorXd& cols) {
    const Eigen::VectorXd x = cols.head(inst_.n);
    int added = 0;
    for (std::size_t l = 0; l < inst_.cones.size(); ++l) {
      const auto& cone = inst_.cones[l];
      const double y0 = cone.rhs(x);
      const Eigen::VectorXd y = cone.lhs(x);
      if (!cone_violated(y0, y)) continue;
      auto& blk = sep_[l];
      const int d = blk.map.dim();
      Eigen::VectorXd w(d);
      for (int j = 0; j < d; ++j) w[j] = cols[blk.map.aux_cols[static_cast<std::size_t>(j)]];
      const double tol = 0.1 * opts_.cone_tol / (d * std::max(1.0, std::abs(y0)));
      for (const auto& c : relax::separate_sep(y0, y, w, tol))
        if (relax::add_sep_cut(host_.lp, blk, c.j, c.gamma) >= 0) ++added;
      // coordinates without any tangent leave the budget row inactive
      for (int j = 0; j < d; ++j) {
        if (!blk.pool.at(j).empty()) continue;
        const double g = y0 > relax::kSeparationTol ? y[j] / y0 : (y[j] >= 0 ? 1.0 : -1.0);
        if (relax::add_sep_cut(host_.lp, blk, j, g) >= 0) ++added;
      }
    }
    stats.cuts += added;
    stats.gamma_growth += added;
    return added;
  }

  TreeOutcome run_tree(bool plain, int oa_iter);

  Stop check_limits() const {
    const auto& L = opts_.limits;
    if (L.max_cuts > 0 && stats.cuts > L.max_cuts) return Stop::Cuts;
    if (L.max_nodes > 0 && stats.nodes >= L.max_nodes) return Stop::Nodes;
    if (L.time_limit > 0 && elapsed() >= L.time_limit) return Stop::Time;
    return Stop::None;
  }

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  bool cone_violated(double y0, const Eigen::VectorXd& y) const {
    return y.squaredNorm() - y0 * y0 > opts_.cone_tol || y0 < -opts_.cone_tol;
  }

  // Continuous relaxation with the given bounds.
  ConicResult nlp(const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
    if (!conic_) conic_ = std::make_unique<ConicSolver>(inst_, opts_.conic);
    ++stats.conic_solves;
    return conic_->solve(l, u);
  }

  // Integers fixed at round(x); returns a conic-feasible point if one exists.
  std::optional<std::pair<Eigen::VectorXd, double>> repair(const Eigen::VectorXd& x, const Eigen::VectorXd& l,
                                                           const Eigen::VectorXd& u) {
    Eigen::VectorXd lf = l, uf = u;
    for (int j : inst_.int_vars) lf[j] = uf[j] = std::round(x[j]);
    auto r = nlp(lf, uf);
    if (r.status == ConicStatus::Optimal) return std::make_pair(r.x, r.obj);
    return std::nullopt;
  }

  template <class T>
  void note(json& rec, const char* key, const T& value) const {
    if (opts_.trace) rec[key] = value;
  }

  void trace(json rec) {
    if (!opts_.trace) return;
    rec["t"] = elapsed();
    *opts_.trace << rec.dump() << '\n';
  }

  const MicqpInstance& inst_;
  Options opts_;
  LiftedConfig cfg_;
  HostLp host_;
  std::vector<relax::SepBlock> sep_;
  std::vector<OmegaPool> flat_pools_;
  bool flat_ = false;
  std::unique_ptr<ConicSolver> conic_;
  Clock::time_point start_;
  Stats stats;

 private:
  bool add_flat(std::size_t l, const Eigen::VectorXd& w) {
    if (!flat_pools_[l].add(w)) return false;
    relax::add_flat_row(host_.lp, host_.cones[l], flat_pools_[l].directions().back());
    return true;
  }
};

lp::LpResult solve_lp(lp::LpModel& model) {
  try {
    return model.solve();
  } catch (const NumericalFailure&) {
    model.reset_basis();
    return model.solve();
  }
}

TreeOutcome Engine::run_tree(bool plain, int oa_iter) {
  const int n = inst_.n;
  const auto& I = inst_.int_vars;
  TreeOutcome out;
  double LB = -kInf;
  Eigen::VectorXd best;
  std::vector<Node> heap;
  long next_id = 0, next_seq = 0;
  NodeOrder order;

  auto push = [&](Node nd) {
    nd.seq = next_seq++;
    heap.push_back(std::move(nd));
    std::push_heap(heap.begin(), heap.end(), order);
  };
  auto fathomable = [&](double v) {
    return opts_.prune && std::isfinite(LB) && v <= LB + opts_.gap_tol * std::max(1.0, std::abs(LB));
  };
  auto global_bound = [&](double current) {
    double b = current;
    if (!heap.empty()) b = std::max(b, heap.front().nb);
    return std::max(b, LB);
  };
  auto update_incumbent = [&](const Eigen::VectorXd& x, double value) {
    if (!(value > LB)) return false;
    LB = value;
    best = x;
    if (opts_.prune) {
      std::erase_if(heap, [&](const Node& nd) { return fathomable(nd.nb); });
      std::make_heap(heap.begin(), heap.end(), order);
    }
    return true;
  };
  auto branch = [&](const Node& nd, int j, double xj, double nb) {
    Node down = nd, up = nd;
    down.u[j] = std::floor(xj);
    up.l[j] = std::floor(xj) + 1.0;
    for (Node* c : {&down, &up}) {
      c->nb = nb;
      c->parent = nd.id;
      c->depth = nd.depth + 1;
      c->id = ++next_id;
      push(*c);
    }
  };

  Node root;
  root.l = inst_.lb;
  root.u = inst_.ub;
  push(root);

  while (!heap.empty()) {
    const Stop stop = check_limits();
    if (stop != Stop::None) {
      out.status = stop == Stop::Time ? SolveStatus::TimeLimit : SolveStatus::IterLimit;
      out.bound = global_bound(-kInf);
      out.lb = LB;
      out.x = best;
      return out;
    }
    std::pop_heap(heap.begin(), heap.end(), order);
    Node nd = std::move(heap.back());
    heap.pop_back();
    if (fathomable(nd.nb)) continue;
    ++stats.nodes;
    for (int j : I) host_.lp.set_var_bounds(j, nd.l[j], nd.u[j]);
    lp::LpResult r = solve_lp(host_.lp);
    ++stats.lp_solves;

    json rec;
    if (opts_.trace) rec = {{"node", nd.id}, {"parent", nd.parent}, {"depth", nd.depth}, {"nb", num(nd.nb)}};
    if (oa_iter >= 0) note(rec, "iter", oa_iter);
    auto finish = [&](const char* action, double current) {
      if (!opts_.trace) return;
      rec["action"] = action;
      rec["lb"] = num(LB);
      rec["bound"] = num(global_bound(current));
      if (!rec.contains("cuts")) rec["cuts"] = 0;
      trace(rec);
    };

    if (r.status == LpStatus::PrimalInfeasible) {
      finish("infeasible", -kInf);
      continue;
    }
    if (r.status == LpStatus::Unbounded) {
      finish("unbounded", kInf);
      out.status = SolveStatus::Unbounded;
      out.bound = kInf;
      return out;
    }
    const double opt = r.obj;
    note(rec, "lp", num(opt));
    if (fathomable(opt)) {
      finish("fathom_bound", -kInf);
      continue;
    }
    const Eigen::VectorXd x = r.x.head(n);
    const int j0 = most_fractional(x, I, opts_.int_tol);
    if (j0 >= 0) {
      note(rec, "branch_var", j0);
      branch(nd, j0, x[j0], opt);
      finish("branch", -kInf);
      continue;
    }

    if (plain) {
      update_incumbent(x, opt);
      finish("incumbent", -kInf);
      continue;
    }
    if (cones_satisfied(inst_, x, opts_.cone_tol)) {
      auto fixed = repair(x, nd.l, nd.u);
      Eigen::VectorXd xi = x;
      double value = opt;
      if (fixed) {
        xi = fixed->first;
        value = fixed->second;
      }
      update_incumbent(xi, value);
      finish("incumbent", -kInf);
      continue;
    }

    // Integral LP point outside the cones: fixed-integer NLP heuristic.
    if (auto fixed = repair(x, nd.l, nd.u)) {
      if (update_incumbent(fixed->first, fixed->second)) note(rec, "heuristic", num(fixed->second));
    }
    if (fathomable(opt)) {
      finish("fathom_bound", -kInf);
      continue;
    }

    bool refine_by_branch = cfg_.strategy == RefineStrategy::BranchBased;
    if (!refine_by_branch) {
      const int added = cfg_.dynamic == DynamicKind::Separable ? separate_sep_at(r.x) : separate_flat_at(x);
      if (added > 0) {
        note(rec, "cuts", added);
        Node again = nd;
        again.nb = opt;
        push(again);
        finish("cut", opt);
        continue;
      }
      note(rec, "fallback", true);
      refine_by_branch = true;
    }

    // Branch-based refinement on the node's continuous relaxation.
    auto cr = nlp(nd.l, nd.u);
    note(rec, "nlp", to_string(cr.status));
    if (cr.status == ConicStatus::Infeasible) {
      finish("refine_infeasible", -kInf);
      continue;
    }
    if (cr.status != ConicStatus::Optimal) {
      if (cr.x.size() == 0 || cr.max_violation > opts_.cone_tol)
        throw NumericalFailure("node relaxation did not converge");
    }
    note(rec, "nlp_obj", num(cr.obj));
    if (fathomable(cr.obj)) {
      finish("refine_fathom", -kInf);
      continue;
    }
    const int j1 = most_fractional(cr.x, I, opts_.int_tol);
    if (j1 < 0) {
      Eigen::VectorXd xi = cr.x;
      for (int j : I) xi[j] = std::round(xi[j]);
      update_incumbent(xi, cr.obj);
      finish("refine_incumbent", -kInf);
      continue;
    }
    note(rec, "branch_var", j1);
    branch(nd, j1, cr.x[j1], cr.obj);
    finish("refine_branch", -kInf);
  }

  out.lb = LB;
  out.x = best;
  if (best.size() > 0) {
    out.status = SolveStatus::Optimal;
    out.bound = LB;
  } else {
    out.status = SolveStatus::Infeasible;
    out.bound = -kInf;
  }
  return out;
}

SolveResult finish_result(const MicqpInstance& inst, Engine& e, SolveStatus status, double objective, double bound,
                          const Eigen::VectorXd& x) {
  SolveResult res;
  res.status = status;
  res.objective = objective;
  res.bound = bound;
  res.x = x;
  res.stats = e.stats;
  res.stats.time_s = e.elapsed();
  if (x.size() > 0) res.max_violation = max_cone_violation(inst, x);
  return res;
}

}  // namespace

SolveResult solve_oa(const MicqpInstance& inst, const std::vector<OmegaPool>& initial, const Options& opts) {
  Engine e(inst, opts);
  e.attach_flat(initial);
  for (int iter = 0;; ++iter) {
    TreeOutcome t = e.run_tree(true, iter);
    if (t.status == SolveStatus::TimeLimit || t.status == SolveStatus::IterLimit)
      return finish_result(inst, e, t.status, -kInf, t.bound, {});
    if (t.status == SolveStatus::Infeasible || t.status == SolveStatus::Unbounded) {
      const double b = t.status == SolveStatus::Infeasible ? -kInf : kInf;
      return finish_result(inst, e, t.status, -kInf, b, {});
    }
    if (cones_satisfied(inst, t.x, opts.cone_tol)) {
      Eigen::VectorXd x = t.x;
      double value = t.lb;
      if (auto fixed = e.repair(t.x, inst.lb, inst.ub)) {
        x = fixed->first;
        value = fixed->second;
      }
      return finish_result(inst, e, SolveStatus::Optimal, value, t.lb, x);
    }
    const int added = e.separate_flat_at(t.x);
    e.trace({{"iter", iter}, {"action", "oa_cuts"}, {"cuts", added}, {"bound", num(t.lb)}});
    if (added == 0) return finish_result(inst, e, SolveStatus::IterLimit, -kInf, t.lb, {});
    if (e.check_limits() != Stop::None) {
      const auto st = e.check_limits() == Stop::Time ? SolveStatus::TimeLimit : SolveStatus::IterLimit;
      return finish_result(inst, e, st, -kInf, t.lb, {});
    }
  }
}

SolveResult solve_oa(const MicqpInstance& inst, const Options& opts) {
  std::vector<OmegaPool> pools;
  for (const auto& c : inst.cones) pools.push_back(OmegaPool::axes(c.dim()));
  return solve_oa(inst, pools, opts);
}

SolveResult solve_lifted(const MicqpInstance& inst, const LiftedConfig& cfg, const Options& opts) {
  Engine e(inst, opts);
  e.attach_lifted(cfg);
  TreeOutcome t = e.run_tree(false, -1);
  return finish_result(inst, e, t.status, t.lb, t.bound, t.x);
}

SolveResult solve_lifted(const MicqpInstance& inst, double eps, RefineStrategy strategy, bool use_static,
                         const Options& opts) {
  LiftedConfig cfg;
  cfg.eps = eps;
  cfg.strategy = strategy;
  cfg.use_static = use_static;
  return solve_lifted(inst, cfg, opts);
}

}  // namespace micqp::bnb
