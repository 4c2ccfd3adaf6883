#include "micqp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace micqp::lp {

namespace {

constexpr double kDegenerateStep = 1e-12;
constexpr int kMaxVerifyRetries = 5;

double scaled_tol(double tol, double bound) {
  return std::isfinite(bound) ? tol * std::max(1.0, std::abs(bound)) : tol;
}

}  // namespace

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::PrimalInfeasible: return "PrimalInfeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Model mutation

int LpModel::add_col(double lb, double ub, double obj) {
  if (std::isnan(lb) || std::isnan(ub) || lb > ub)
    throw DomainError("LpModel::add_col: invalid bounds");
  const int j = num_cols();
  col_lb_.push_back(lb);
  col_ub_.push_back(ub);
  obj_.push_back(obj);
  cols_.emplace_back();
  if (has_basis()) {
    // Logical variables are numbered after the structurals; shift them.
    for (int& k : basis_)
      if (k >= j) ++k;
    state_.insert(state_.begin() + j, NbState::AtLower);
    value_.insert(value_.begin() + j, 0.0);
    position_.insert(position_.begin() + j, -1);
    place_nonbasic(j);
  }
  return j;
}

int LpModel::add_row(std::span<const SparseEntry> coeffs, Relation rel, double rhs) {
  if (!std::isfinite(rhs)) throw DomainError("LpModel::add_row: rhs must be finite");
  Row row;
  row.relation = rel;
  row.rhs = rhs;
  for (const auto& e : coeffs) {
    if (e.index < 0 || e.index >= num_cols())
      throw IndexError("LpModel::add_row: column index " + std::to_string(e.index) + " out of range");
    if (e.value == 0.0) continue;
    if (!std::isfinite(e.value)) throw DomainError("LpModel::add_row: non-finite coefficient");
    row.coeffs.push_back(e);
  }
  // merge duplicate indices
  std::sort(row.coeffs.begin(), row.coeffs.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  std::vector<SparseEntry> merged;
  for (const auto& e : row.coeffs) {
    if (!merged.empty() && merged.back().index == e.index)
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  std::erase_if(merged, [](const SparseEntry& e) { return e.value == 0.0; });
  row.coeffs = std::move(merged);

  const int i = num_rows();
  for (const auto& e : row.coeffs) cols_[static_cast<std::size_t>(e.index)].push_back({i, e.value});
  rows_.push_back(std::move(row));
  return i;
}

void LpModel::add_rows(std::span<const Row> rows) {
  for (const auto& r : rows) add_row(r);
}

void LpModel::set_var_bounds(int j, double lb, double ub) {
  if (j < 0 || j >= num_cols()) throw IndexError("LpModel::set_var_bounds: index out of range");
  if (std::isnan(lb) || std::isnan(ub)) throw DomainError("LpModel::set_var_bounds: NaN bound");
  col_lb_[static_cast<std::size_t>(j)] = lb;
  col_ub_[static_cast<std::size_t>(j)] = ub;
  if (has_basis() && state_[static_cast<std::size_t>(j)] != NbState::Basic) {
    const double old = value_[static_cast<std::size_t>(j)];
    place_nonbasic(j);
    const double delta = value_[static_cast<std::size_t>(j)] - old;
    if (delta != 0.0 && (values_stale_ || binv_.rows() != num_rows())) {
      values_stale_ = true;
    } else if (delta != 0.0) {
      const Eigen::VectorXd alpha = ftran(j);
      for (int p = 0; p < num_rows(); ++p)
        value_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] -= alpha[p] * delta;
    }
  }
}

void LpModel::set_objective(int j, double c) {
  if (j < 0 || j >= num_cols()) throw IndexError("LpModel::set_objective: index out of range");
  obj_[static_cast<std::size_t>(j)] = c;
}

void LpModel::set_objective(const Eigen::VectorXd& c) {
  if (c.size() != num_cols()) throw DimensionError("LpModel::set_objective: length mismatch");
  for (int j = 0; j < num_cols(); ++j) obj_[static_cast<std::size_t>(j)] = c[j];
}

void LpModel::reset_basis() {
  basis_.clear();
  position_.clear();
  state_.clear();
  value_.clear();
  binv_.resize(0, 0);
  rows_in_basis_ = 0;
  values_stale_ = true;
}

// ---------------------------------------------------------------------------
// Variable helpers

double LpModel::lower(int k) const {
  const int n = num_cols();
  if (k < n) return col_lb_[static_cast<std::size_t>(k)];
  const Row& r = rows_[static_cast<std::size_t>(k - n)];
  return r.relation == Relation::LessEq ? -kInf : r.rhs;
}

double LpModel::upper(int k) const {
  const int n = num_cols();
  if (k < n) return col_ub_[static_cast<std::size_t>(k)];
  const Row& r = rows_[static_cast<std::size_t>(k - n)];
  return r.relation == Relation::GreaterEq ? kInf : r.rhs;
}

double LpModel::cost(int k) const {
  return k < num_cols() ? -obj_[static_cast<std::size_t>(k)] : 0.0;
}

template <typename F>
void LpModel::for_column(int k, F&& f) const {
  const int n = num_cols();
  if (k < n) {
    for (const auto& e : cols_[static_cast<std::size_t>(k)]) f(e.index, e.value);
  } else {
    f(k - n, -1.0);
  }
}

LpModel::NbState LpModel::default_state(int k) const {
  const double lo = lower(k), up = upper(k);
  if (lo == up) return NbState::Fixed;
  if (std::isfinite(lo)) return NbState::AtLower;
  if (std::isfinite(up)) return NbState::AtUpper;
  return NbState::Free;
}

void LpModel::place_nonbasic(int k) {
  const double lo = lower(k), up = upper(k);
  auto& st = state_[static_cast<std::size_t>(k)];
  if (lo == up) {
    st = NbState::Fixed;
  } else if (st == NbState::AtUpper && std::isfinite(up)) {
    st = NbState::AtUpper;
  } else if (std::isfinite(lo)) {
    st = NbState::AtLower;
  } else if (std::isfinite(up)) {
    st = NbState::AtUpper;
  } else {
    st = NbState::Free;
  }
  double v = 0.0;
  if (st == NbState::Fixed || st == NbState::AtLower) v = lo;
  else if (st == NbState::AtUpper) v = up;
  value_[static_cast<std::size_t>(k)] = v;
}

// ---------------------------------------------------------------------------
// Factorization

void LpModel::ensure_basis() {
  const int m = num_rows();
  const int n = num_cols();
  if (!has_basis()) {
    basis_.resize(static_cast<std::size_t>(m));
    position_.assign(static_cast<std::size_t>(n + m), -1);
    state_.assign(static_cast<std::size_t>(n + m), NbState::AtLower);
    value_.assign(static_cast<std::size_t>(n + m), 0.0);
    for (int k = 0; k < n; ++k) place_nonbasic(k);
    for (int i = 0; i < m; ++i) {
      basis_[static_cast<std::size_t>(i)] = n + i;
      position_[static_cast<std::size_t>(n + i)] = i;
      state_[static_cast<std::size_t>(n + i)] = NbState::Basic;
    }
    binv_ = -Eigen::MatrixXd::Identity(m, m);
    rows_in_basis_ = m;
    pivots_since_refactor_ = 0;
    values_stale_ = true;
    return;
  }
  if (rows_in_basis_ < m) extend_basis_for_new_rows();
}

void LpModel::extend_basis_for_new_rows() {
  const int n = num_cols();
  const int m0 = rows_in_basis_;
  const int m = num_rows();
  // B' = [[B, 0], [C, -I]]  =>  B'^-1 = [[B^-1, 0], [C B^-1, -I]]
  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(m, m);
  next.topLeftCorner(m0, m0) = binv_;
  for (int i = m0; i < m; ++i) {
    for (const auto& e : rows_[static_cast<std::size_t>(i)].coeffs) {
      const int p = position_[static_cast<std::size_t>(e.index)];
      if (p >= 0) next.row(i).head(m0) += e.value * binv_.row(p);
    }
    next(i, i) = -1.0;
  }
  binv_ = std::move(next);

  for (int i = m0; i < m; ++i) {
    basis_.push_back(n + i);
    position_.push_back(i);
    state_.push_back(NbState::Basic);
    value_.push_back(0.0);
  }
  rows_in_basis_ = m;
  values_stale_ = true;
}

void LpModel::refactor() {
  const int n = num_cols();
  const int m = num_rows();
  std::vector<int> struct_pos;             // basis positions holding structurals
  std::vector<int> row_of_nonbasic_logical;
  std::vector<int> row_slot(static_cast<std::size_t>(m), -1);
  for (int p = 0; p < m; ++p)
    if (basis_[static_cast<std::size_t>(p)] < n) struct_pos.push_back(p);
  for (int i = 0; i < m; ++i)
    if (state_[static_cast<std::size_t>(n + i)] != NbState::Basic) {
      row_slot[static_cast<std::size_t>(i)] = static_cast<int>(row_of_nonbasic_logical.size());
      row_of_nonbasic_logical.push_back(i);
    }
  const int k = static_cast<int>(struct_pos.size());
  bool ok = k == static_cast<int>(row_of_nonbasic_logical.size());

  Eigen::MatrixXd Minv;
  if (ok && k > 0) {
    std::vector<Eigen::Triplet<double>> trip;  // A[rows with nonbasic logicals, S]
    for (int a = 0; a < k; ++a) {
      const int j = basis_[static_cast<std::size_t>(struct_pos[static_cast<std::size_t>(a)])];
      for (const auto& e : cols_[static_cast<std::size_t>(j)]) {
        const int b = row_slot[static_cast<std::size_t>(e.index)];
        if (b >= 0) trip.emplace_back(b, a, e.value);
      }
    }
    Eigen::SparseMatrix<double> M(k, k);
    M.setFromTriplets(trip.begin(), trip.end());
    M.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(M);
    if (lu.info() != Eigen::Success) {
      ok = false;
    } else {
      Minv = lu.solve(Eigen::MatrixXd::Identity(k, k));
      if (!Minv.allFinite()) {
        ok = false;
      } else {
        const double scale = std::max(1.0, Minv.cwiseAbs().maxCoeff());
        Eigen::MatrixXd resid = M * Minv;
        resid.diagonal().array() -= 1.0;
        if (!(resid.cwiseAbs().maxCoeff() <= 1e-9 * scale)) ok = false;
      }
    }
  }
  if (!ok) {
    // Singular basis: fall back to the all-logical basis.
    reset_basis();
    ensure_basis();
    return;
  }
  binv_.setZero(m, m);
  std::vector<int> slot_of_col(static_cast<std::size_t>(n), -1);  // structural -> index in S
  for (int a = 0; a < k; ++a) {
    const int p = struct_pos[static_cast<std::size_t>(a)];
    slot_of_col[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] = a;
    for (int b = 0; b < k; ++b)
      binv_(p, row_of_nonbasic_logical[static_cast<std::size_t>(b)]) = Minv(a, b);
  }
  Eigen::RowVectorXd prow(k);
  for (int p = 0; p < m; ++p) {
    const int var = basis_[static_cast<std::size_t>(p)];
    if (var < n) continue;
    const int i = var - n;
    // row i of A[:, S] M^-1
    prow.setZero();
    for (const auto& e : rows_[static_cast<std::size_t>(i)].coeffs) {
      const int a = slot_of_col[static_cast<std::size_t>(e.index)];
      if (a >= 0) prow += e.value * Minv.row(a);
    }
    for (int b = 0; b < k; ++b)
      binv_(p, row_of_nonbasic_logical[static_cast<std::size_t>(b)]) = prow[b];
    binv_(p, i) = -1.0;
  }
  pivots_since_refactor_ = 0;
  values_stale_ = true;
}

void LpModel::compute_basic_values() {
  const int m = num_rows();
  const int nv = nvars();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (int k = 0; k < nv; ++k) {
    if (state_[static_cast<std::size_t>(k)] == NbState::Basic) continue;
    const double v = value_[static_cast<std::size_t>(k)];
    if (v == 0.0) continue;
    for_column(k, [&](int i, double a) { rhs[i] -= a * v; });
  }
  const Eigen::VectorXd xb = binv_ * rhs;
  for (int p = 0; p < m; ++p) value_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] = xb[p];
  values_stale_ = false;
}

double LpModel::row_residual() const {
  const int n = num_cols();
  double worst = 0.0;
  for (int i = 0; i < num_rows(); ++i) {
    double act = -value_[static_cast<std::size_t>(n + i)];
    double scale = std::abs(value_[static_cast<std::size_t>(n + i)]);
    for (const auto& e : rows_[static_cast<std::size_t>(i)].coeffs) {
      const double t = e.value * value_[static_cast<std::size_t>(e.index)];
      act += t;
      scale = std::max(scale, std::abs(t));
    }
    worst = std::max(worst, std::abs(act) / std::max(1.0, scale));
  }
  return worst;
}

void LpModel::refresh_values(const LpOptions& opts) {
  if (row_residual() <= 0.1 * opts.primal_tol) return;
  compute_basic_values();
  if (row_residual() > 0.1 * opts.primal_tol) {
    refactor();
    compute_basic_values();
  }
}

void LpModel::compute_duals(std::span<const double> basic_cost, Eigen::VectorXd& y) const {
  const int m = num_rows();
  y.setZero(m);
  for (int p = 0; p < m; ++p) {
    const double c = basic_cost[static_cast<std::size_t>(p)];
    if (c != 0.0) y.noalias() += c * binv_.row(p).transpose();
  }
}

double LpModel::reduced_cost(int k, const Eigen::VectorXd& y, std::span<const double> costs) const {
  double d = costs[static_cast<std::size_t>(k)];
  for_column(k, [&](int i, double a) { d -= y[i] * a; });
  return d;
}

Eigen::VectorXd LpModel::ftran(int k) const {
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(num_rows());
  for_column(k, [&](int i, double a) { alpha.noalias() += a * binv_.col(i); });
  return alpha;
}

void LpModel::pivot(int r, int q, const Eigen::VectorXd& alpha) {
  const int m = num_rows();
  const int leaving = basis_[static_cast<std::size_t>(r)];
  const Eigen::RowVectorXd pr = binv_.row(r) / alpha[r];
  std::vector<int> rows_nz, cols_nz;
  for (int i = 0; i < m; ++i)
    if (i != r && alpha[i] != 0.0) rows_nz.push_back(i);
  for (int j = 0; j < m; ++j)
    if (pr[j] != 0.0) cols_nz.push_back(j);
  if (4 * rows_nz.size() < static_cast<std::size_t>(m)) {
    for (int j : cols_nz) {
      const double pj = pr[j];
      double* colp = binv_.col(j).data();
      for (int i : rows_nz) colp[i] -= alpha[i] * pj;
    }
  } else {
    Eigen::VectorXd col = alpha;
    col[r] = 0.0;
    for (int j : cols_nz) binv_.col(j) -= pr[j] * col;
  }
  binv_.row(r) = pr;
  basis_[static_cast<std::size_t>(r)] = q;
  position_[static_cast<std::size_t>(q)] = r;
  position_[static_cast<std::size_t>(leaving)] = -1;
  state_[static_cast<std::size_t>(q)] = NbState::Basic;
  ++pivots_since_refactor_;
}

// ---------------------------------------------------------------------------
// Feasibility helpers

double LpModel::primal_infeasibility(int r) const {
  const int k = basis_[static_cast<std::size_t>(r)];
  const double v = value_[static_cast<std::size_t>(k)];
  const double lo = lower(k), up = upper(k);
  if (v < lo) return lo - v;
  if (v > up) return v - up;
  return 0.0;
}

bool LpModel::primal_feasible(double tol) const {
  for (int p = 0; p < num_rows(); ++p) {
    const int k = basis_[static_cast<std::size_t>(p)];
    const double v = value_[static_cast<std::size_t>(k)];
    if (v < lower(k) - scaled_tol(tol, lower(k)) || v > upper(k) + scaled_tol(tol, upper(k)))
      return false;
  }
  return true;
}

bool LpModel::make_dual_feasible(double tol) {
  const int nv = nvars();
  std::vector<double> costs(static_cast<std::size_t>(nv));
  for (int k = 0; k < nv; ++k) costs[static_cast<std::size_t>(k)] = cost(k);
  std::vector<double> bc(static_cast<std::size_t>(num_rows()));
  for (int p = 0; p < num_rows(); ++p) bc[static_cast<std::size_t>(p)] = costs[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])];
  Eigen::VectorXd y;
  compute_duals(bc, y);
  std::vector<int> flips;
  for (int k = 0; k < nv; ++k) {
    const NbState st = state_[static_cast<std::size_t>(k)];
    if (st == NbState::Basic || st == NbState::Fixed) continue;
    const double d = reduced_cost(k, y, costs);
    const bool boxed = std::isfinite(lower(k)) && std::isfinite(upper(k));
    if (st == NbState::AtLower && d < -tol) {
      if (!boxed) return false;
      flips.push_back(k);
    } else if (st == NbState::AtUpper && d > tol) {
      if (!boxed) return false;
      flips.push_back(k);
    } else if (st == NbState::Free && std::abs(d) > tol) {
      return false;
    }
  }
  for (int k : flips) {
    auto& st = state_[static_cast<std::size_t>(k)];
    st = st == NbState::AtLower ? NbState::AtUpper : NbState::AtLower;
    value_[static_cast<std::size_t>(k)] = st == NbState::AtLower ? lower(k) : upper(k);
  }
  if (!flips.empty()) compute_basic_values();
  return true;
}

// ---------------------------------------------------------------------------
// Primal simplex step

LpModel::Phase LpModel::primal_iterate(bool phase_one, bool bland, const LpOptions& opts,
                                       bool& degenerate) {
  const int m = num_rows();
  const int nv = nvars();
  std::vector<double> costs(static_cast<std::size_t>(nv), 0.0);
  std::vector<double> bc(static_cast<std::size_t>(m), 0.0);
  if (phase_one) {
    for (int p = 0; p < m; ++p) {
      const int k = basis_[static_cast<std::size_t>(p)];
      const double v = value_[static_cast<std::size_t>(k)];
      if (v < lower(k) - scaled_tol(opts.primal_tol, lower(k))) bc[static_cast<std::size_t>(p)] = -1.0;
      else if (v > upper(k) + scaled_tol(opts.primal_tol, upper(k))) bc[static_cast<std::size_t>(p)] = 1.0;
      costs[static_cast<std::size_t>(k)] = bc[static_cast<std::size_t>(p)];
    }
  } else {
    for (int k = 0; k < nv; ++k) costs[static_cast<std::size_t>(k)] = cost(k);
    for (int p = 0; p < m; ++p) bc[static_cast<std::size_t>(p)] = costs[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])];
  }
  Eigen::VectorXd y;
  compute_duals(bc, y);

  int q = -1;
  double best = 0.0;
  double dir = 0.0;
  for (int k = 0; k < nv; ++k) {
    const NbState st = state_[static_cast<std::size_t>(k)];
    if (st == NbState::Basic || st == NbState::Fixed) continue;
    const double d = reduced_cost(k, y, costs);
    double kdir = 0.0;
    if (st == NbState::AtLower && d < -opts.dual_tol) kdir = 1.0;
    else if (st == NbState::AtUpper && d > opts.dual_tol) kdir = -1.0;
    else if (st == NbState::Free && std::abs(d) > opts.dual_tol) kdir = d < 0 ? 1.0 : -1.0;
    if (kdir == 0.0) continue;
    if (bland) {
      q = k;
      dir = kdir;
      break;
    }
    if (std::abs(d) > best) {
      best = std::abs(d);
      q = k;
      dir = kdir;
    }
  }
  if (q < 0) return phase_one ? Phase::Infeasible : Phase::Done;

  const Eigen::VectorXd alpha = ftran(q);

  // Harris two-pass ratio test over basics with phase-dependent bounds.
  auto eff_bounds = [&](int p, double& lo, double& up) {
    const int k = basis_[static_cast<std::size_t>(p)];
    lo = lower(k);
    up = upper(k);
    if (phase_one) {
      const double v = value_[static_cast<std::size_t>(k)];
      if (v < lo - scaled_tol(opts.primal_tol, lo)) {
        up = lo;
        lo = -kInf;
      } else if (v > up + scaled_tol(opts.primal_tol, up)) {
        lo = up;
        up = kInf;
      }
    }
  };
  double theta_max = kInf;
  for (int p = 0; p < m; ++p) {
    const double rate = -dir * alpha[p];
    if (std::abs(alpha[p]) <= opts.pivot_tol) continue;
    double lo, up;
    eff_bounds(p, lo, up);
    const double v = value_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])];
    if (rate < 0 && std::isfinite(lo))
      theta_max = std::min(theta_max, (v - lo + scaled_tol(opts.primal_tol, lo)) / -rate);
    else if (rate > 0 && std::isfinite(up))
      theta_max = std::min(theta_max, (up + scaled_tol(opts.primal_tol, up) - v) / rate);
  }
  const double range = upper(q) - lower(q);  // inf unless boxed
  if (!std::isfinite(theta_max) && !std::isfinite(range)) {
    if (phase_one) throw NumericalFailure("LP phase one: unbounded ray");
    return Phase::Unbounded;
  }

  int r = -1;
  double theta = kInf;
  double best_pivot = 0.0;
  if (std::isfinite(theta_max)) {
    for (int p = 0; p < m; ++p) {
      const double rate = -dir * alpha[p];
      if (std::abs(alpha[p]) <= opts.pivot_tol) continue;
      double lo, up;
      eff_bounds(p, lo, up);
      const double v = value_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])];
      double ratio;
      if (rate < 0 && std::isfinite(lo)) ratio = (v - lo) / -rate;
      else if (rate > 0 && std::isfinite(up)) ratio = (up - v) / rate;
      else continue;
      if (ratio > theta_max) continue;
      const bool better = bland ? (r < 0 || basis_[static_cast<std::size_t>(p)] < basis_[static_cast<std::size_t>(r)])
                                : std::abs(alpha[p]) > best_pivot;
      if (better) {
        best_pivot = std::abs(alpha[p]);
        r = p;
        theta = std::max(ratio, 0.0);
      }
    }
  }

  if (std::isfinite(range) && range <= theta) {
    // Bound flip of the entering variable.
    degenerate = range < kDegenerateStep;
    for (int p = 0; p < m; ++p)
      value_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] -= dir * range * alpha[p];
    auto& st = state_[static_cast<std::size_t>(q)];
    st = dir > 0 ? NbState::AtUpper : NbState::AtLower;
    value_[static_cast<std::size_t>(q)] = dir > 0 ? upper(q) : lower(q);
    return Phase::Continue;
  }
  if (r < 0) throw NumericalFailure("LP ratio test failed");

  const int leaving = basis_[static_cast<std::size_t>(r)];
  double lo, up;
  eff_bounds(r, lo, up);
  const double rate = -dir * alpha[r];
  const double hit = rate < 0 ? lo : up;
  const double true_lo = lower(leaving), true_up = upper(leaving);

  degenerate = theta < kDegenerateStep;
  for (int p = 0; p < m; ++p)
    value_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] -= dir * theta * alpha[p];
  value_[static_cast<std::size_t>(q)] += dir * theta;

  pivot(r, q, alpha);
  auto& st = state_[static_cast<std::size_t>(leaving)];
  if (true_lo == true_up) {
    st = NbState::Fixed;
    value_[static_cast<std::size_t>(leaving)] = true_lo;
  } else if (hit == true_lo) {
    st = NbState::AtLower;
    value_[static_cast<std::size_t>(leaving)] = true_lo;
  } else {
    st = NbState::AtUpper;
    value_[static_cast<std::size_t>(leaving)] = true_up;
  }
  return Phase::Continue;
}

// ---------------------------------------------------------------------------
// Dual simplex step (requires a dual feasible basis)

LpModel::Phase LpModel::dual_iterate(bool bland, const LpOptions& opts, bool& degenerate) {
  const int m = num_rows();
  const int nv = nvars();

  int r = -1;
  double worst = 0.0;
  for (int p = 0; p < m; ++p) {
    const int k = basis_[static_cast<std::size_t>(p)];
    const double v = value_[static_cast<std::size_t>(k)];
    const double lo = lower(k), up = upper(k);
    double infeas = 0.0;
    if (v < lo - scaled_tol(opts.primal_tol, lo)) infeas = lo - v;
    else if (v > up + scaled_tol(opts.primal_tol, up)) infeas = v - up;
    if (infeas <= 0.0) continue;
    if (bland) {
      if (r < 0 || k < basis_[static_cast<std::size_t>(r)]) r = p;
    } else if (infeas > worst) {
      worst = infeas;
      r = p;
    }
  }
  if (r < 0) return Phase::Done;

  const int leaving = basis_[static_cast<std::size_t>(r)];
  const double v_r = value_[static_cast<std::size_t>(leaving)];
  const bool to_lower = v_r < lower(leaving);
  const double target = to_lower ? lower(leaving) : upper(leaving);

  std::vector<double> costs(static_cast<std::size_t>(nv));
  for (int k = 0; k < nv; ++k) costs[static_cast<std::size_t>(k)] = cost(k);
  std::vector<double> bc(static_cast<std::size_t>(m));
  for (int p = 0; p < m; ++p) bc[static_cast<std::size_t>(p)] = costs[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])];
  Eigen::VectorXd y;
  compute_duals(bc, y);

  const Eigen::RowVectorXd rho = binv_.row(r);
  struct Cand {
    int k;
    double d;
    double a;
  };
  std::vector<Cand> cands;
  for (int k = 0; k < nv; ++k) {
    const NbState st = state_[static_cast<std::size_t>(k)];
    if (st == NbState::Basic || st == NbState::Fixed) continue;
    double a = 0.0;
    for_column(k, [&](int i, double v) { a += rho[i] * v; });
    if (std::abs(a) <= opts.pivot_tol) continue;
    // x_r moves by -a * delta_k; need +direction when to_lower.
    const double need = to_lower ? 1.0 : -1.0;
    bool ok = false;
    if (st == NbState::AtLower) ok = -a * need > 0;       // delta_k > 0
    else if (st == NbState::AtUpper) ok = a * need > 0;   // delta_k < 0
    else ok = true;                                       // free
    if (!ok) continue;
    cands.push_back({k, reduced_cost(k, y, costs), a});
  }
  if (cands.empty()) return Phase::Infeasible;

  double theta_max = kInf;
  for (const auto& c : cands)
    theta_max = std::min(theta_max, (std::abs(c.d) + opts.dual_tol) / std::abs(c.a));
  int q = -1;
  double best_pivot = 0.0;
  double theta_d = 0.0;
  for (const auto& c : cands) {
    const double ratio = std::abs(c.d) / std::abs(c.a);
    if (ratio > theta_max) continue;
    const bool better = bland ? (q < 0 || c.k < q) : std::abs(c.a) > best_pivot;
    if (better) {
      best_pivot = std::abs(c.a);
      q = c.k;
      theta_d = ratio;
    }
  }
  if (q < 0) throw NumericalFailure("LP dual ratio test failed");

  const Eigen::VectorXd alpha = ftran(q);
  if (std::abs(alpha[r]) <= opts.pivot_tol * 0.1) {
    // Row and column disagree badly; force a refactorization.
    pivots_since_refactor_ = opts.refactor_every;
    degenerate = true;
    return Phase::Continue;
  }
  const double delta = (v_r - target) / alpha[r];
  degenerate = theta_d < kDegenerateStep;
  for (int p = 0; p < m; ++p)
    value_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] -= alpha[p] * delta;
  value_[static_cast<std::size_t>(q)] += delta;
  pivot(r, q, alpha);
  auto& st = state_[static_cast<std::size_t>(leaving)];
  if (lower(leaving) == upper(leaving)) st = NbState::Fixed;
  else st = to_lower ? NbState::AtLower : NbState::AtUpper;
  value_[static_cast<std::size_t>(leaving)] = target;
  return Phase::Continue;
}

// ---------------------------------------------------------------------------
// Driver

void LpModel::check_rows_valid() const {
  for (std::size_t j = 0; j < col_lb_.size(); ++j)
    if (col_lb_[j] > col_ub_[j]) return;  // handled as infeasible by solve()
}

LpResult LpModel::solve(const LpOptions& opts) {
  LpResult res;
  const int n = num_cols();
  // Contradictory column bounds: infeasible without pivoting.
  for (int j = 0; j < n; ++j) {
    if (col_lb_[static_cast<std::size_t>(j)] > col_ub_[static_cast<std::size_t>(j)]) {
      res.status = LpStatus::PrimalInfeasible;
      res.x = Eigen::VectorXd::Zero(n);
      return res;
    }
  }
  ensure_basis();
  if (pivots_since_refactor_ >= opts.refactor_every) refactor();
  if (values_stale_) compute_basic_values();

  const int m = num_rows();
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : 200 * (m + n) + 5000;
  const int bland_after = 10 * (m + n);
  int degenerate_run = 0;
  bool bland = false;
  int verify_retries = 0;
  int iter = 0;

  for (;;) {
    if (iter++ > max_iter) throw NumericalFailure("LP iteration limit exceeded");
    if (pivots_since_refactor_ >= opts.refactor_every) {
      refactor();
      compute_basic_values();
    }
    bool degenerate = false;
    Phase ph;
    if (primal_feasible(opts.primal_tol)) {
      ph = primal_iterate(false, bland, opts, degenerate);
      if (ph == Phase::Done || ph == Phase::Unbounded) {
        if (pivots_since_refactor_ > 0 && verify_retries < kMaxVerifyRetries) {
          ++verify_retries;
          refresh_values(opts);
          if (!primal_feasible(opts.primal_tol)) continue;
          ph = primal_iterate(false, bland, opts, degenerate);
          if (ph == Phase::Continue) continue;
        }
        res.status = ph == Phase::Done ? LpStatus::Optimal : LpStatus::Unbounded;
        break;
      }
    } else if (make_dual_feasible(opts.dual_tol)) {
      if (primal_feasible(opts.primal_tol)) continue;
      ph = dual_iterate(bland, opts, degenerate);
      if (ph == Phase::Infeasible) {
        if (pivots_since_refactor_ > 0 && verify_retries < kMaxVerifyRetries) {
          ++verify_retries;
          refresh_values(opts);
          continue;
        }
        res.status = LpStatus::PrimalInfeasible;
        break;
      }
    } else {
      ph = primal_iterate(true, bland, opts, degenerate);
      if (ph == Phase::Infeasible) {
        if (pivots_since_refactor_ > 0 && verify_retries < kMaxVerifyRetries) {
          ++verify_retries;
          refresh_values(opts);
          continue;
        }
        res.status = LpStatus::PrimalInfeasible;
        break;
      }
    }
    degenerate_run = degenerate ? degenerate_run + 1 : 0;
    if (degenerate_run > bland_after) bland = true;
  }

  res.iterations = iter;
  res.x.resize(n);
  for (int j = 0; j < n; ++j) res.x[j] = value_[static_cast<std::size_t>(j)];
  res.obj = 0.0;
  for (int j = 0; j < n; ++j) res.obj += obj_[static_cast<std::size_t>(j)] * res.x[j];
  return res;
}

void LpModel::dump(std::ostream& os) const {
  auto name = [](int j) { return "x" + std::to_string(j); };
  os << "maximize\n ";
  bool first = true;
  for (int j = 0; j < num_cols(); ++j) {
    if (obj_[static_cast<std::size_t>(j)] == 0.0) continue;
    os << (first ? " " : " + ") << obj_[static_cast<std::size_t>(j)] << ' ' << name(j);
    first = false;
  }
  if (first) os << " 0";
  os << "\nsubject to\n";
  for (int i = 0; i < num_rows(); ++i) {
    const Row& r = rows_[static_cast<std::size_t>(i)];
    os << " r" << i << ":";
    for (const auto& e : r.coeffs) os << ' ' << (e.value >= 0 ? "+" : "") << e.value << ' ' << name(e.index);
    os << (r.relation == Relation::LessEq ? " <= " : r.relation == Relation::Equal ? " = " : " >= ")
       << r.rhs << '\n';
  }
  os << "bounds\n";
  for (int j = 0; j < num_cols(); ++j)
    os << ' ' << col_lb_[static_cast<std::size_t>(j)] << " <= " << name(j)
       << " <= " << col_ub_[static_cast<std::size_t>(j)] << '\n';
  os << "end\n";
}

}  // namespace micqp::lp
