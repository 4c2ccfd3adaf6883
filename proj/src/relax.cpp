#include "micqp/relax.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <omp.h>

namespace micqp::relax {

using lp::Relation;
using lp::SparseEntry;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDirectionTol = 1e-10;
constexpr double kGammaTol = 1e-12;

// cos/sin with exact zeros at multiples of pi/2
double snap(double v) { return std::abs(v) < 1e-15 ? 0.0 : v; }
double cos_snap(double a) { return snap(std::cos(a)); }
double sin_snap(double a) { return snap(std::sin(a)); }

int add_free_col(LpModel& model) { return model.add_col(-kInf, kInf, 0.0); }

int add_sparse_row(LpModel& model, std::vector<SparseEntry> coeffs, Relation rel, double rhs) {
  return model.add_row(coeffs, rel, rhs);
}

int add_tangent_row(LpModel& model, int y0, int yj, int wj, double gamma) {
  const double scale = 1.0 / std::max(1.0, gamma * gamma);
  return add_sparse_row(model, {{yj, 2.0 * gamma * scale}, {y0, -gamma * gamma * scale}, {wj, -scale}},
                        Relation::LessEq, 0.0);
}

}  // namespace

ConeVarMap add_cone_columns(LpModel& model, int d) {
  ConeVarMap map;
  map.y0_col = add_free_col(model);
  for (int j = 0; j < d; ++j) map.y_cols.push_back(add_free_col(model));
  return map;
}

TowerShape tower_shape(int d) {
  if (d < 2) throw DomainError("tower_shape: d must be >= 2, got " + std::to_string(d));
  TowerShape sh;
  sh.d = d;
  sh.r.push_back(d);
  while (sh.r.back() > 1) sh.r.push_back((sh.r.back() + 1) / 2);
  sh.K = static_cast<int>(sh.r.size()) - 1;
  for (int v : sh.r) sh.R += v;
  for (int k = 0; k < sh.K; ++k)
    for (int i = 1; i <= sh.r[static_cast<std::size_t>(k)] / 2; ++i) sh.gadgets.emplace_back(i, k);
  return sh;
}

// ---------------------------------------------------------------------------
// Pools

bool OmegaPool::contains(const Eigen::VectorXd& unit) const {
  for (const auto& w : dirs_)
    if ((w - unit).norm() <= kDirectionTol) return true;
  return false;
}

bool OmegaPool::add(const Eigen::VectorXd& omega) {
  if (omega.size() != dim_) throw DimensionError("OmegaPool::add: direction has wrong dimension");
  const double nrm = omega.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) throw DomainError("OmegaPool::add: zero or non-finite direction");
  Eigen::VectorXd unit = omega / nrm;
  if (contains(unit)) return false;
  dirs_.push_back(std::move(unit));
  return true;
}

OmegaPool OmegaPool::axes(int dim) {
  OmegaPool p(dim);
  for (int j = 0; j < dim; ++j) {
    p.add(Eigen::VectorXd::Unit(dim, j));
    p.add(-Eigen::VectorXd::Unit(dim, j));
  }
  return p;
}

OmegaPool OmegaPool::diagonals2() {
  OmegaPool p(2);
  for (double s1 : {-1.0, 1.0})
    for (double s2 : {-1.0, 1.0}) p.add(Eigen::Vector2d(s1, s2));
  return p;
}

bool GammaPool::contains(int j, double gamma) const {
  for (double g : at(j))
    if (std::abs(g - gamma) <= kGammaTol * std::max(1.0, std::abs(gamma))) return true;
  return false;
}

bool GammaPool::add(int j, double gamma) {
  if (j < 0 || j >= dim()) throw IndexError("GammaPool::add: coordinate out of range");
  if (!std::isfinite(gamma)) throw DomainError("GammaPool::add: non-finite tangent point");
  if (contains(j, gamma)) return false;
  auto& v = points_[static_cast<std::size_t>(j)];
  v.insert(std::upper_bound(v.begin(), v.end(), gamma), gamma);
  return true;
}

int GammaPool::total() const {
  int t = 0;
  for (const auto& v : points_) t += static_cast<int>(v.size());
  return t;
}

GammaPool GammaPool::uniform(int d, const std::vector<double>& gammas) {
  GammaPool p(d);
  for (int j = 0; j < d; ++j)
    for (double g : gammas) p.add(j, g);
  return p;
}

// ---------------------------------------------------------------------------
// Flat outer approximation

int add_flat_row(LpModel& model, const ConeVarMap& map, const Eigen::VectorXd& omega) {
  if (omega.size() != map.dim()) throw DimensionError("add_flat_row: direction dimension != cone dimension");
  std::vector<SparseEntry> row;
  for (int j = 0; j < map.dim(); ++j)
    if (omega[j] != 0.0) row.push_back({map.y_cols[static_cast<std::size_t>(j)], omega[j]});
  row.push_back({map.y0_col, -1.0});
  return add_sparse_row(model, std::move(row), Relation::LessEq, 0.0);
}

std::vector<int> attach_flat_oa(LpModel& model, const ConeVarMap& map, const OmegaPool& pool) {
  if (pool.dim() != map.dim()) throw DimensionError("attach_flat_oa: pool dimension != cone dimension");
  std::vector<int> rows;
  for (const auto& w : pool.directions()) rows.push_back(add_flat_row(model, map, w));
  return rows;
}

std::vector<FlatCut> separate_flat(double y0, const Eigen::VectorXd& y, double tol) {
  std::vector<FlatCut> out;
  const double nrm = y.norm();
  if (nrm > 0.0) {
    if (nrm > y0 + tol) out.push_back({y / nrm, nrm - y0});
    return out;
  }
  if (y0 < -tol) {
    for (int j = 0; j < y.size(); ++j) {
      out.push_back({Eigen::VectorXd::Unit(y.size(), j), -y0});
      out.push_back({-Eigen::VectorXd::Unit(y.size(), j), -y0});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rotation gadget

double ntwo_quality(int s) { return 1.0 / std::cos(kPi / std::ldexp(1.0, s)) - 1.0; }

NtwoBlock attach_ntwo(LpModel& model, int y0, int y1, int y2, int s) {
  if (s < 1) throw DomainError("attach_ntwo: s must be >= 1");
  NtwoBlock b;
  b.s = s;
  for (int i = 0; i < 2 * s; ++i) b.v_cols.push_back(add_free_col(model));
  auto v = [&](int idx) { return b.v_cols[static_cast<std::size_t>(idx - 1)]; };  // 1-based

  // v1 = y1 cos(pi) + y2 sin(pi)
  const double c0 = cos_snap(kPi), s0 = sin_snap(kPi);
  b.eq_rows.push_back(add_sparse_row(model, {{v(1), 1.0}, {y1, -c0}, {y2, -s0}}, Relation::Equal, 0.0));
  // v2 >= |y2 cos(pi) - y1 sin(pi)|
  b.ineq_rows.push_back(add_sparse_row(model, {{v(2), 1.0}, {y2, -c0}, {y1, s0}}, Relation::GreaterEq, 0.0));
  b.ineq_rows.push_back(add_sparse_row(model, {{v(2), 1.0}, {y2, c0}, {y1, -s0}}, Relation::GreaterEq, 0.0));
  for (int i = 1; i <= s - 1; ++i) {
    const double a = kPi / std::ldexp(1.0, i);
    const double c = cos_snap(a), sn = sin_snap(a);
    b.eq_rows.push_back(add_sparse_row(
        model, {{v(2 * i + 1), 1.0}, {v(2 * i - 1), -c}, {v(2 * i), -sn}}, Relation::Equal, 0.0));
    b.ineq_rows.push_back(add_sparse_row(
        model, {{v(2 * i + 2), 1.0}, {v(2 * i), -c}, {v(2 * i - 1), sn}}, Relation::GreaterEq, 0.0));
    b.ineq_rows.push_back(add_sparse_row(
        model, {{v(2 * i + 2), 1.0}, {v(2 * i), c}, {v(2 * i - 1), -sn}}, Relation::GreaterEq, 0.0));
  }
  const double a = kPi / std::ldexp(1.0, s);
  b.eq_rows.push_back(add_sparse_row(
      model, {{y0, 1.0}, {v(2 * s - 1), -cos_snap(a)}, {v(2 * s), -sin_snap(a)}}, Relation::Equal, 0.0));
  return b;
}

std::vector<double> ntwo_lift(double y0, double y1, double y2, int s) {
  std::vector<double> v(static_cast<std::size_t>(2 * s));
  auto at = [&](int idx) -> double& { return v[static_cast<std::size_t>(idx - 1)]; };
  const double c0 = cos_snap(kPi), s0 = sin_snap(kPi);
  at(1) = y1 * c0 + y2 * s0;
  at(2) = std::abs(y2 * c0 - y1 * s0);
  for (int i = 1; i <= s - 1; ++i) {
    const double a = kPi / std::ldexp(1.0, i);
    const double c = cos_snap(a), sn = sin_snap(a);
    at(2 * i + 1) = at(2 * i - 1) * c + at(2 * i) * sn;
    at(2 * i + 2) = std::abs(at(2 * i) * c - at(2 * i - 1) * sn);
  }
  const double a = kPi / std::ldexp(1.0, s);
  const double c = cos_snap(a), sn = sin_snap(a);
  at(2 * s) = std::max(at(2 * s), (y0 - c * at(2 * s - 1)) / sn);
  return v;
}

int ntwo_depth(int k, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw DomainError("ntwo_depth: eps must lie in (0, 1/2)");
  if (k < 0) throw DomainError("ntwo_depth: negative level");
  const double arg = (16.0 / 9.0) / (kPi * kPi) * std::log1p(eps);
  const int base = (k + 2) / 2;  // ceil((k+1)/2)
  const int s = base - static_cast<int>(std::ceil(std::log(arg) / std::log(4.0)));
  return std::max(s, 1);
}

std::vector<int> ntwo_depth_schedule(int d, double eps) {
  const TowerShape sh = tower_shape(d);
  std::vector<int> out;
  for (int k = 0; k < sh.K; ++k) out.push_back(ntwo_depth(k, eps));
  return out;
}

// ---------------------------------------------------------------------------
// Tower

TowerLeaf TowerLeaf::exact(int s) { return exact_schedule({s}); }

TowerLeaf TowerLeaf::exact_schedule(std::vector<int> s_per_level) {
  TowerLeaf l;
  l.kind = LeafKind::Exact;
  l.s_per_level = std::move(s_per_level);
  return l;
}

TowerLeaf TowerLeaf::dynamic(OmegaPool initial) {
  TowerLeaf l;
  l.kind = LeafKind::Dynamic;
  l.omega = std::move(initial);
  return l;
}

TowerLeaf TowerLeaf::sep(std::vector<double> gammas) {
  TowerLeaf l;
  l.kind = LeafKind::SepH2;
  l.gammas = std::move(gammas);
  return l;
}

int TowerBlock::num_aux_cols() const {
  int n = static_cast<int>(t_cols.size());
  for (const auto& g : gadgets) {
    n += static_cast<int>(g.ntwo.v_cols.size());
    if (g.w1_col >= 0) n += 2;
  }
  return n;
}

int TowerBlock::num_rows() const {
  int n = 0;
  for (const auto& g : gadgets) n += static_cast<int>(g.rows.size());
  return n;
}

int TowerBlock::num_eq_rows() const {
  int n = 0;
  for (const auto& g : gadgets) n += static_cast<int>(g.ntwo.eq_rows.size());
  return n;
}

int TowerBlock::num_ineq_rows() const { return num_rows() - num_eq_rows(); }

namespace {

void attach_leaf(LpModel& model, Gadget& g, const TowerLeaf& leaf) {
  switch (leaf.kind) {
    case LeafKind::Exact: {
      if (leaf.s_per_level.empty()) throw DomainError("attach_tower: empty depth schedule");
      const std::size_t idx = std::min(static_cast<std::size_t>(g.level), leaf.s_per_level.size() - 1);
      const int s = leaf.s_per_level.size() == 1 ? leaf.s_per_level[0] : leaf.s_per_level[idx];
      g.ntwo = attach_ntwo(model, g.out_col, g.in1_col, g.in2_col, s);
      g.rows = g.ntwo.eq_rows;
      g.rows.insert(g.rows.end(), g.ntwo.ineq_rows.begin(), g.ntwo.ineq_rows.end());
      break;
    }
    case LeafKind::Dynamic: {
      if (leaf.omega.dim() != 2) throw DimensionError("attach_tower: gadget directions must be 2-D");
      g.omega = leaf.omega;
      ConeVarMap m{g.out_col, {g.in1_col, g.in2_col}, {}};
      g.rows = attach_flat_oa(model, m, g.omega);
      break;
    }
    case LeafKind::SepH2: {
      g.w1_col = add_free_col(model);
      g.w2_col = add_free_col(model);
      g.rows.push_back(add_sparse_row(model, {{g.w1_col, 1.0}, {g.w2_col, 1.0}, {g.out_col, -1.0}},
                                      Relation::LessEq, 0.0));
      g.rows.push_back(add_sparse_row(model, {{g.out_col, 1.0}}, Relation::GreaterEq, 0.0));
      g.gamma = GammaPool(2);
      for (double gm : leaf.gammas) {
        for (int j = 0; j < 2; ++j) {
          if (!g.gamma.add(j, gm)) continue;
          g.rows.push_back(add_tangent_row(model, g.out_col, j == 0 ? g.in1_col : g.in2_col,
                                           j == 0 ? g.w1_col : g.w2_col, gm));
        }
      }
      break;
    }
  }
}

}  // namespace

TowerBlock attach_tower(LpModel& model, const ConeVarMap& map, const TowerLeaf& leaf) {
  TowerBlock blk;
  blk.map = map;
  blk.shape = tower_shape(map.dim());
  blk.kind = leaf.kind;
  std::vector<int> cur = map.y_cols;
  for (int k = 0; k < blk.shape.K; ++k) {
    const int rk = blk.shape.r[static_cast<std::size_t>(k)];
    std::vector<int> next;
    for (int i = 1; i <= rk / 2; ++i) {
      Gadget g;
      g.level = k;
      g.index = i;
      if (k == blk.shape.K - 1) {
        g.out_col = map.y0_col;
      } else {
        g.out_col = add_free_col(model);
        blk.t_cols.push_back(g.out_col);
      }
      g.in1_col = cur[static_cast<std::size_t>(2 * i - 2)];
      g.in2_col = cur[static_cast<std::size_t>(2 * i - 1)];
      attach_leaf(model, g, leaf);
      next.push_back(g.out_col);
      blk.gadgets.push_back(std::move(g));
    }
    if (rk % 2 == 1) next.push_back(cur.back());  // pass-through by aliasing
    cur = std::move(next);
  }
  blk.map.aux_cols = blk.t_cols;
  for (const auto& g : blk.gadgets) {
    blk.map.aux_cols.insert(blk.map.aux_cols.end(), g.ntwo.v_cols.begin(), g.ntwo.v_cols.end());
    if (g.w1_col >= 0) {
      blk.map.aux_cols.push_back(g.w1_col);
      blk.map.aux_cols.push_back(g.w2_col);
    }
  }
  return blk;
}

TowerBlock attach_lifted_eps(LpModel& model, const ConeVarMap& map, double eps) {
  return attach_tower(model, map, TowerLeaf::exact_schedule(ntwo_depth_schedule(map.dim(), eps)));
}

int refine_tower(LpModel& model, TowerBlock& block, const Eigen::VectorXd& x, double tol) {
  int added = 0;
  for (auto& g : block.gadgets) {
    const double out = x[g.out_col];
    const Eigen::Vector2d in(x[g.in1_col], x[g.in2_col]);
    if (block.kind == LeafKind::Dynamic) {
      for (const auto& cut : separate_flat(out, in, tol)) {
        if (!g.omega.add(cut.omega)) continue;
        ConeVarMap m{g.out_col, {g.in1_col, g.in2_col}, {}};
        g.rows.push_back(add_flat_row(model, m, cut.omega));
        ++added;
      }
    } else if (block.kind == LeafKind::SepH2) {
      const Eigen::Vector2d w(x[g.w1_col], x[g.w2_col]);
      for (const auto& cut : separate_sep(out, in, w, tol)) {
        if (!g.gamma.add(cut.j, cut.gamma)) continue;
        g.rows.push_back(add_tangent_row(model, g.out_col, cut.j == 0 ? g.in1_col : g.in2_col,
                                         cut.j == 0 ? g.w1_col : g.w2_col, cut.gamma));
        ++added;
      }
    }
  }
  return added;
}

void lift_tower(const TowerBlock& block, Eigen::VectorXd& x) {
  for (const auto& g : block.gadgets) {
    const double a = x[g.in1_col], b = x[g.in2_col];
    if (g.out_col != block.map.y0_col) x[g.out_col] = std::hypot(a, b);
    const double out = x[g.out_col];
    if (block.kind == LeafKind::Exact) {
      const auto v = ntwo_lift(out, a, b, g.ntwo.s);
      for (std::size_t i = 0; i < v.size(); ++i) x[g.ntwo.v_cols[i]] = v[i];
    } else if (block.kind == LeafKind::SepH2) {
      x[g.w1_col] = out > 0.0 ? a * a / out : 0.0;
      x[g.w2_col] = out > 0.0 ? b * b / out : 0.0;
    }
  }
}

// ---------------------------------------------------------------------------
// Separable relaxation

SepBlock attach_sep(LpModel& model, const ConeVarMap& map, const GammaPool& pool) {
  if (pool.dim() != map.dim()) throw DimensionError("attach_sep: pool dimension != cone dimension");
  SepBlock blk;
  blk.map = map;
  blk.map.aux_cols.clear();
  const int d = map.dim();
  for (int j = 0; j < d; ++j) blk.map.aux_cols.push_back(add_free_col(model));
  std::vector<SparseEntry> budget;
  for (int w : blk.map.aux_cols) budget.push_back({w, 1.0});
  budget.push_back({map.y0_col, -1.0});
  blk.budget_row = add_sparse_row(model, std::move(budget), Relation::LessEq, 0.0);
  blk.sign_row = add_sparse_row(model, {{map.y0_col, 1.0}}, Relation::GreaterEq, 0.0);
  blk.pool = GammaPool(d);
  for (int j = 0; j < d; ++j)
    for (double g : pool.at(j)) add_sep_cut(model, blk, j, g);
  return blk;
}

int add_sep_cut(LpModel& model, SepBlock& block, int j, double gamma) {
  if (!block.pool.add(j, gamma)) return -1;
  const int row = add_tangent_row(model, block.map.y0_col, block.map.y_cols[static_cast<std::size_t>(j)],
                                  block.map.aux_cols[static_cast<std::size_t>(j)], gamma);
  block.tangent_rows.push_back(row);
  return row;
}

std::vector<GammaCut> separate_sep(double y0, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                   double tol) {
  std::vector<GammaCut> out;
  const int d = static_cast<int>(y.size());
  if (y0 > tol) {
    for (int j = 0; j < d; ++j) {
      const double g = y[j] / y0;
      if (g * y[j] - w[j] > tol) out.push_back({j, g});
    }
    return out;
  }
  bool cut = false;
  for (int j = 0; j < d && !cut; ++j)
    cut = 2.0 * std::abs(y[j]) - y0 - w[j] > tol;
  if (cut) {
    for (int j = 0; j < d; ++j) {
      out.push_back({j, -1.0});
      out.push_back({j, 1.0});
    }
  }
  return out;
}

void lift_sep(const SepBlock& block, Eigen::VectorXd& x) {
  const double y0 = x[block.map.y0_col];
  for (int j = 0; j < block.map.dim(); ++j) {
    const double yj = x[block.map.y_cols[static_cast<std::size_t>(j)]];
    x[block.map.aux_cols[static_cast<std::size_t>(j)]] = y0 > 0.0 ? yj * yj / y0 : 0.0;
  }
}

// ---------------------------------------------------------------------------
// Perspective cuts

PerspectiveRow perspective_cut(const std::function<double(double)>& f,
                               const std::function<double(double)>& fprime, double gamma) {
  const double fv = f(gamma);
  const double fp = fprime(gamma);
  if (!std::isfinite(fv) || !std::isfinite(fp))
    throw DomainError("perspective_cut: function not finite at the tangent point");
  return {fv - gamma * fp, fp};
}

// ---------------------------------------------------------------------------
// Quality

std::vector<Eigen::VectorXd> quality_directions(int d, int num_dirs, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> dirs;
  for (int j = 0; j < d; ++j) {
    dirs.push_back(Eigen::VectorXd::Unit(d, j));
    dirs.push_back(-Eigen::VectorXd::Unit(d, j));
  }
  if (d == 2) {
    constexpr int kAngles = 1024;
    for (int i = 0; i < kAngles; ++i) {
      const double a = 2.0 * kPi * i / kAngles;
      dirs.push_back(Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (int i = 0; i < num_dirs; ++i) {
    Eigen::VectorXd u(d);
    for (int j = 0; j < d; ++j) u[j] = g(rng);
    const double nrm = u.norm();
    if (nrm > 0.0) dirs.push_back(u / nrm);
  }
  return dirs;
}

namespace {

LpModel quality_model(const LpModel& model, const ConeVarMap& map) {
  LpModel m = model;
  m.set_objective(Eigen::VectorXd::Zero(m.num_cols()));
  m.set_var_bounds(map.y0_col, 1.0, 1.0);
  return m;
}

double direction_value(LpModel& m, const ConeVarMap& map, const Eigen::VectorXd& u) {
  for (int j = 0; j < map.dim(); ++j) m.set_objective(map.y_cols[static_cast<std::size_t>(j)], u[j]);
  const auto r = m.solve();
  if (r.status == lp::LpStatus::Unbounded) return kInf;
  if (r.status != lp::LpStatus::Optimal) return -kInf;
  return r.obj;
}

}  // namespace

double measure_quality_serial(const LpModel& model, const ConeVarMap& map, int num_dirs,
                              std::uint64_t seed) {
  const auto dirs = quality_directions(map.dim(), num_dirs, seed);
  LpModel m = quality_model(model, map);
  double best = -kInf;
  for (const auto& u : dirs) best = std::max(best, direction_value(m, map, u));
  return best - 1.0;
}

double measure_quality(const LpModel& model, const ConeVarMap& map, int num_dirs,
                       std::uint64_t seed) {
  const auto dirs = quality_directions(map.dim(), num_dirs, seed);
  const LpModel base = quality_model(model, map);
  const int count = static_cast<int>(dirs.size());
  double best = -kInf;
#pragma omp parallel
  {
    LpModel m = base;
    double local = -kInf;
#pragma omp for schedule(static)
    for (int i = 0; i < count; ++i)
      local = std::max(local, direction_value(m, map, dirs[static_cast<std::size_t>(i)]));
#pragma omp critical
    best = std::max(best, local);
  }
  return best - 1.0;
}

}  // namespace micqp::relax
