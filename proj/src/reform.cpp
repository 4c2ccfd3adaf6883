#include "micqp/reform.hpp"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace micqp::reform {

Eigen::VectorXd ReformulatedInstance::back_map(const Eigen::VectorXd& x_ext) const {
  if (x_ext.size() != inst.n) throw DimensionError("back_map: point has wrong length");
  return x_ext.head(n_orig);
}

Eigen::MatrixXd ReformulatedInstance::back_map_matrix() const {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_orig, inst.n);
  P.leftCols(n_orig).setIdentity();
  return P;
}

namespace {

struct Affine {
  std::vector<std::pair<int, double>> terms;
  double c = 0.0;
};

Affine var(int j, double s = 1.0) { return {{{j, s}}, 0.0}; }

Affine combine(const Affine& p, double sp, const Affine& q, double sq) {
  Affine r;
  for (const auto& [j, v] : p.terms) r.terms.emplace_back(j, sp * v);
  for (const auto& [j, v] : q.terms) r.terms.emplace_back(j, sq * v);
  r.c = sp * p.c + sq * q.c;
  return r;
}

Affine scaled(const Affine& p, double s) {
  Affine r = p;
  for (auto& t : r.terms) t.second *= s;
  r.c *= s;
  return r;
}

Affine from_row(const Eigen::MatrixXd& A, int r, double b) {
  Affine e;
  for (int j = 0; j < A.cols(); ++j)
    if (A(r, j) != 0.0) e.terms.emplace_back(j, A(r, j));
  e.c = b;
  return e;
}

Affine from_vec(const Eigen::VectorXd& a, double b0) {
  Affine e;
  for (int j = 0; j < a.size(); ++j)
    if (a[j] != 0.0) e.terms.emplace_back(j, a[j]);
  e.c = b0;
  return e;
}

class Builder {
 public:
  explicit Builder(const MicqpInstance& src) : src_(src), n_(src.n) {}

  int new_var(double lb, double ub) {
    lb_.push_back(lb);
    ub_.push_back(ub);
    return n_++;
  }

  // e <= rhs
  void row_le(const Affine& e, double rhs) { rows_.push_back({e, rhs - e.c}); }

  void cone(std::vector<Affine> y, Affine y0) { cones_.push_back({std::move(y), std::move(y0)}); }

  // p^2 <= q r with q, r >= 0
  void rotated(const Affine& p, const Affine& q, const Affine& r) {
    cone({scaled(p, 2.0), combine(q, 1.0, r, -1.0)}, combine(q, 1.0, r, 1.0));
  }

  void keep(const ConeBlock& cb) { kept_.push_back(cb); }

  MicqpInstance finish(const std::string& kind) const {
    MicqpInstance out;
    out.n = n_;
    const int n0 = src_.n;
    out.c = Eigen::VectorXd::Zero(n_);
    out.c.head(n0) = src_.c;
    out.lb.resize(n_);
    out.ub.resize(n_);
    out.lb.head(n0) = src_.lb;
    out.ub.head(n0) = src_.ub;
    for (int k = 0; k < n_ - n0; ++k) {
      out.lb[n0 + k] = lb_[static_cast<std::size_t>(k)];
      out.ub[n0 + k] = ub_[static_cast<std::size_t>(k)];
    }
    const int m0 = src_.num_rows();
    const int m = m0 + static_cast<int>(rows_.size());
    out.E = Eigen::MatrixXd::Zero(m, n_);
    out.h.resize(m);
    out.E.topLeftCorner(m0, n0) = src_.E;
    out.h.head(m0) = src_.h;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      for (const auto& [j, v] : rows_[i].first.terms) out.E(m0 + static_cast<int>(i), j) += v;
      out.h[m0 + static_cast<int>(i)] = rows_[i].second;
    }
    for (const auto& cb : kept_) {
      ConeBlock c = cb;
      c.A.conservativeResize(Eigen::NoChange, n_);
      c.A.rightCols(n_ - n0).setZero();
      c.a.conservativeResize(n_);
      c.a.tail(n_ - n0).setZero();
      out.cones.push_back(std::move(c));
    }
    for (const auto& [ys, y0] : cones_) {
      ConeBlock c;
      const int d = static_cast<int>(ys.size());
      c.A = Eigen::MatrixXd::Zero(d, n_);
      c.b.resize(d);
      for (int r = 0; r < d; ++r) {
        for (const auto& [j, v] : ys[static_cast<std::size_t>(r)].terms) c.A(r, j) += v;
        c.b[r] = ys[static_cast<std::size_t>(r)].c;
      }
      c.a = Eigen::VectorXd::Zero(n_);
      for (const auto& [j, v] : y0.terms) c.a[j] += v;
      c.b0 = y0.c;
      out.cones.push_back(std::move(c));
    }
    out.int_vars = src_.int_vars;
    out.minimize_input = src_.minimize_input;
    out.meta = src_.meta;
    out.meta["reform"] = kind;
    out.validate();
    return out;
  }

 private:
  const MicqpInstance& src_;
  int n_;
  std::vector<double> lb_, ub_;
  std::vector<std::pair<Affine, double>> rows_;
  std::vector<std::pair<std::vector<Affine>, Affine>> cones_;
  std::vector<ConeBlock> kept_;
};

using GadgetFn = std::function<void(Builder&, const Affine& out, const Affine& in1, const Affine& in2)>;

// Pairs adjacent nodes level by level; an odd last node moves up unchanged.
void build_tower(Builder& b, std::vector<Affine> level, const Affine& root, const GadgetFn& gadget) {
  while (level.size() > 2) {
    std::vector<Affine> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      const Affine t = var(b.new_var(0.0, kInf));
      gadget(b, t, level[i], level[i + 1]);
      next.push_back(t);
    }
    if (level.size() % 2 == 1) next.push_back(level.back());
    level = std::move(next);
  }
  gadget(b, root, level[0], level[1]);
}

std::vector<Affine> cone_rows(const ConeBlock& cb) {
  std::vector<Affine> ys;
  for (int r = 0; r < cb.dim(); ++r) ys.push_back(from_row(cb.A, r, cb.b[r]));
  return ys;
}

void plain_gadget(Builder& b, const Affine& out, const Affine& in1, const Affine& in2) { b.cone({in1, in2}, out); }

void sep_gadget(Builder& b, const Affine& out, const Affine& in1, const Affine& in2) {
  const int v1 = b.new_var(0.0, kInf);
  const int v2 = b.new_var(0.0, kInf);
  b.row_le(combine(combine(var(v1), 1.0, var(v2), 1.0), 1.0, out, -1.0), 0.0);
  b.rotated(in1, var(v1), out);
  b.rotated(in2, var(v2), out);
}

ReformulatedInstance wrap(const MicqpInstance& src, const Builder& b, const std::string& kind) {
  ReformulatedInstance r;
  r.inst = b.finish(kind);
  r.n_orig = src.n;
  r.kind = kind;
  return r;
}

}  // namespace

ReformulatedInstance reform_tower(const MicqpInstance& inst) {
  inst.validate();
  Builder b(inst);
  for (const auto& cb : inst.cones) {
    if (cb.dim() <= 2) {
      b.keep(cb);
      continue;
    }
    build_tower(b, cone_rows(cb), from_vec(cb.a, cb.b0), plain_gadget);
  }
  return wrap(inst, b, "tower");
}

ReformulatedInstance reform_sep(const MicqpInstance& inst) {
  inst.validate();
  Builder b(inst);
  for (const auto& cb : inst.cones) {
    const Affine y0 = from_vec(cb.a, cb.b0);
    const auto ys = cone_rows(cb);
    Affine budget = scaled(y0, -1.0);
    for (const auto& y : ys) {
      const int w = b.new_var(0.0, kInf);
      budget.terms.emplace_back(w, 1.0);
      b.rotated(y, var(w), y0);
    }
    b.row_le(budget, 0.0);
    b.row_le(scaled(y0, -1.0), 0.0);
  }
  return wrap(inst, b, "sep");
}

ReformulatedInstance reform_towersep(const MicqpInstance& inst) {
  inst.validate();
  Builder b(inst);
  for (const auto& cb : inst.cones) {
    if (cb.dim() < 2) {
      b.keep(cb);
      continue;
    }
    build_tower(b, cone_rows(cb), from_vec(cb.a, cb.b0), sep_gadget);
  }
  return wrap(inst, b, "towersep");
}

ReformulatedInstance strengthen_perspective(const MicqpInstance& inst) {
  inst.validate();
  auto fail = [](const std::string& why) { return NotApplicable("strengthen_perspective: " + why); };
  const auto fam = inst.meta.find("family");
  if (fam == inst.meta.end() || fam->second != "classical") throw fail("instance is not a classical portfolio");
  if (inst.n % 2 != 0 || inst.num_cones() != 1) throw fail("expected variables (x, z) and a single cone");
  const int m = inst.n / 2;
  const auto& cb = inst.cones[0];
  if (cb.dim() != m || !cb.A.leftCols(m).isIdentity(0.0) || !cb.A.rightCols(m).isZero(0.0) || !cb.b.isZero(0.0) ||
      !cb.a.isZero(0.0) || !(cb.b0 > 0.0))
    throw fail("risk cone is not ||x|| <= sigma with identity factor");
  for (int j = 0; j < m; ++j) {
    if (!inst.is_integer(m + j) || inst.lb[m + j] < 0.0 || inst.ub[m + j] > 1.0) throw fail("z is not binary");
    if (inst.lb[j] < 0.0) throw fail("x is not nonnegative");
    bool linked = false;
    for (int i = 0; i < inst.num_rows() && !linked; ++i) {
      Eigen::VectorXd expect = Eigen::VectorXd::Zero(inst.n);
      expect[j] = 1.0;
      expect[m + j] = -1.0;
      linked = inst.h[i] == 0.0 && inst.E.row(i).transpose() == expect;
    }
    if (!linked) throw fail("missing x_j <= z_j");
  }
  Builder b(inst);
  Affine budget;
  for (int j = 0; j < m; ++j) {
    const int w = b.new_var(0.0, kInf);
    budget.terms.emplace_back(w, 1.0);
    b.rotated(var(j), var(w), var(m + j));
  }
  b.row_le(budget, cb.b0 * cb.b0);
  return wrap(inst, b, "persp");
}

ReformulatedInstance reformulate(const MicqpInstance& inst, std::string_view kind) {
  if (kind == "sep") return reform_sep(inst);
  if (kind == "tower") return reform_tower(inst);
  if (kind == "towersep") return reform_towersep(inst);
  if (kind == "persp") return strengthen_perspective(inst);
  if (kind == "none") {
    ReformulatedInstance r;
    r.inst = inst;
    r.n_orig = inst.n;
    r.kind = "none";
    return r;
  }
  throw DomainError("reformulate: unknown kind '" + std::string(kind) + "'");
}

}  // namespace micqp::reform
