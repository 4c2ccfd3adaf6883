#include <doctest.h>

#include <functional>
#include <random>
#include <sstream>

#include "micqp/lp.hpp"

using namespace micqp;
using namespace micqp::lp;

namespace {

std::vector<SparseEntry> dense_row(const Eigen::VectorXd& a) {
  std::vector<SparseEntry> out;
  for (int j = 0; j < a.size(); ++j) out.push_back({j, a[j]});
  return out;
}

struct DenseLp {
  Eigen::MatrixXd A;  // rows a.x <= b
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd lb, ub;
};

// Optimum over all vertices of a small bounded LP (max c.x), or -inf if empty.
double vertex_enumeration(const DenseLp& p) {
  const int n = static_cast<int>(p.c.size());
  Eigen::MatrixXd G(p.A.rows() + 2 * n, n);
  Eigen::VectorXd g(G.rows());
  G.topRows(p.A.rows()) = p.A;
  g.head(p.A.rows()) = p.b;
  for (int j = 0; j < n; ++j) {
    G.row(p.A.rows() + 2 * j).setZero();
    G(p.A.rows() + 2 * j, j) = 1.0;
    g[p.A.rows() + 2 * j] = p.ub[j];
    G.row(p.A.rows() + 2 * j + 1).setZero();
    G(p.A.rows() + 2 * j + 1, j) = -1.0;
    g[p.A.rows() + 2 * j + 1] = -p.lb[j];
  }
  const int m = static_cast<int>(G.rows());
  double best = -kInf;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Eigen::MatrixXd M(n, n);
      Eigen::VectorXd r(n);
      for (int k = 0; k < n; ++k) {
        M.row(k) = G.row(idx[static_cast<std::size_t>(k)]);
        r[k] = g[idx[static_cast<std::size_t>(k)]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (lu.rank() < n) return;
      Eigen::VectorXd x = lu.solve(r);
      if (((G * x - g).array() > 1e-9).any()) return;
      best = std::max(best, p.c.dot(x));
      return;
    }
    for (int i = start; i < m; ++i) {
      idx[static_cast<std::size_t>(depth)] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

LpModel build(const DenseLp& p) {
  LpModel lp;
  for (int j = 0; j < p.c.size(); ++j) lp.add_col(p.lb[j], p.ub[j], p.c[j]);
  for (int i = 0; i < p.A.rows(); ++i) lp.add_row(dense_row(p.A.row(i)), Relation::LessEq, p.b[i]);
  return lp;
}

DenseLp random_lp(std::mt19937& rng, int n, int m) {
  std::normal_distribution<double> g;
  DenseLp p;
  p.A = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return g(rng); });
  p.b = Eigen::VectorXd::NullaryExpr(m, [&] { return g(rng); });
  p.c = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
  p.lb = Eigen::VectorXd::Constant(n, -2.0);
  p.ub = Eigen::VectorXd::Constant(n, 2.0);
  return p;
}

}  // namespace

TEST_CASE("single constraint") {
  LpModel lp;
  lp.add_col(0, 10, 1.0);
  lp.add_row(std::vector<SparseEntry>{{0, 1.0}}, Relation::LessEq, 3.0);
  auto r = lp.solve();
  CHECK(r.status == LpStatus::Optimal);
  CHECK(r.obj == doctest::Approx(3.0));
}

TEST_CASE("textbook") {
  LpModel lp;
  lp.add_col(0, kInf, 1.0);
  lp.add_col(0, kInf, 1.0);
  lp.add_row(std::vector<SparseEntry>{{0, 1.0}, {1, 1.0}}, Relation::LessEq, 1.0);
  auto r = lp.solve();
  CHECK(r.status == LpStatus::Optimal);
  CHECK(r.obj == doctest::Approx(1.0));
}

TEST_CASE("contradictory rows") {
  LpModel lp;
  lp.add_col(-kInf, kInf, 1.0);
  lp.add_row(std::vector<SparseEntry>{{0, 1.0}}, Relation::GreaterEq, 2.0);
  lp.add_row(std::vector<SparseEntry>{{0, 1.0}}, Relation::LessEq, 1.0);
  CHECK(lp.solve().status == LpStatus::PrimalInfeasible);
}

TEST_CASE("unbounded") {
  LpModel lp;
  lp.add_col(0, kInf, 1.0);
  lp.add_col(-kInf, kInf, 0.0);
  lp.add_row(std::vector<SparseEntry>{{0, 1.0}, {1, -1.0}}, Relation::LessEq, 1.0);
  CHECK(lp.solve().status == LpStatus::Unbounded);
}

TEST_CASE("free variables and equalities") {
  // max -|x - 3| style: x free, y >= x - 3, y >= 3 - x, max -y
  LpModel lp;
  lp.add_col(-kInf, kInf, 0.0);
  lp.add_col(-kInf, kInf, -1.0);
  lp.add_row(std::vector<SparseEntry>{{1, 1.0}, {0, -1.0}}, Relation::GreaterEq, -3.0);
  lp.add_row(std::vector<SparseEntry>{{1, 1.0}, {0, 1.0}}, Relation::GreaterEq, 3.0);
  auto r = lp.solve();
  CHECK(r.status == LpStatus::Optimal);
  CHECK(r.obj == doctest::Approx(0.0));
  CHECK(r.x[0] == doctest::Approx(3.0));
  lp.add_row(std::vector<SparseEntry>{{0, 1.0}}, Relation::Equal, 5.0);
  r = lp.solve();
  CHECK(r.status == LpStatus::Optimal);
  CHECK(r.obj == doctest::Approx(-2.0));
}

TEST_CASE("bound tightening to empty box and back") {
  LpModel lp;
  lp.add_col(0, 10, 1.0);
  lp.add_col(0, 10, 2.0);
  lp.add_row(std::vector<SparseEntry>{{0, 1.0}, {1, 1.0}}, Relation::LessEq, 4.0);
  CHECK(lp.solve().obj == doctest::Approx(8.0));
  lp.set_var_bounds(1, 5, 10);
  CHECK(lp.solve().status == LpStatus::PrimalInfeasible);
  lp.set_var_bounds(1, 0, 1);
  auto r = lp.solve();
  CHECK(r.status == LpStatus::Optimal);
  CHECK(r.obj == doctest::Approx(5.0));
  lp.set_var_bounds(0, 3, 2);
  CHECK(lp.solve().status == LpStatus::PrimalInfeasible);
  CHECK_THROWS_AS(lp.set_var_bounds(7, 0, 1), IndexError);
  CHECK_THROWS_AS(lp.add_row(std::vector<SparseEntry>{{9, 1.0}}, Relation::LessEq, 0.0), IndexError);
}

TEST_CASE("non-binding row leaves objective unchanged") {
  LpModel lp;
  lp.add_col(0, 1, 1.0);
  lp.add_col(0, 1, 1.0);
  const double before = lp.solve().obj;
  lp.add_row(std::vector<SparseEntry>{{0, 1.0}, {1, 1.0}}, Relation::LessEq, 5.0);
  CHECK(lp.solve().obj == doctest::Approx(before));
}

TEST_CASE("random LPs match vertex enumeration") {
  std::mt19937 rng(5);
  int solved = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + t % 3;
    DenseLp p = random_lp(rng, n, 2 + t % 5);
    const double want = vertex_enumeration(p);
    LpModel lp = build(p);
    auto r = lp.solve();
    if (!std::isfinite(want)) {
      CHECK(r.status == LpStatus::PrimalInfeasible);
      continue;
    }
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.obj == doctest::Approx(want).epsilon(1e-8));
    CHECK(((p.A * r.x - p.b).array() <= 1e-7).all());
    ++solved;
  }
  CHECK(solved > 50);
}

TEST_CASE("incremental rows: monotone, warm equals cold, iterations stay small") {
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  for (int t = 0; t < 40; ++t) {
    const int n = 8;
    DenseLp p = random_lp(rng, n, 6);
    p.b.array() += 3.0;  // origin feasible
    LpModel warm = build(p);
    auto r = warm.solve();
    REQUIRE(r.status == LpStatus::Optimal);
    double prev = r.obj;
    for (int k = 0; k < 10; ++k) {
      // cut off the current optimum
      Eigen::VectorXd a = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
      const double rhs = a.dot(r.x) - 0.1 * std::abs(g(rng));
      warm.add_row(dense_row(a), Relation::LessEq, std::max(rhs, 0.5));
      p.A.conservativeResize(p.A.rows() + 1, n);
      p.A.row(p.A.rows() - 1) = a;
      p.b.conservativeResize(p.b.size() + 1);
      p.b[p.b.size() - 1] = std::max(rhs, 0.5);
      r = warm.solve();
      REQUIRE(r.status == LpStatus::Optimal);
      CHECK(r.obj <= prev + 1e-9);
      prev = r.obj;
      LpModel cold = build(p);
      auto rc = cold.solve();
      CHECK(rc.obj == doctest::Approx(r.obj).epsilon(1e-7));
      CHECK(r.iterations <= rc.iterations + 10);
    }
  }
}

TEST_CASE("weak duality against random feasible points") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 30; ++t) {
    DenseLp p = random_lp(rng, 4, 5);
    p.b.array() = p.b.array().abs() + 0.5;  // origin feasible
    LpModel lp = build(p);
    auto r = lp.solve();
    REQUIRE(r.status == LpStatus::Optimal);
    for (int s = 0; s < 200; ++s) {
      Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(4, [&] { return u(rng); });
      if (((p.A * x - p.b).array() > 0).any()) continue;
      CHECK(r.obj >= p.c.dot(x) - 1e-9);
    }
  }
}

TEST_CASE("relaxing a bound never decreases the objective") {
  std::mt19937 rng(33);
  for (int t = 0; t < 30; ++t) {
    DenseLp p = random_lp(rng, 5, 4);
    p.b.array() = p.b.array().abs() + 0.5;
    LpModel lp = build(p);
    const double before = lp.solve().obj;
    lp.set_var_bounds(t % 5, -3.0, 3.0);
    CHECK(lp.solve().obj >= before - 1e-9);
  }
}

TEST_CASE("many pivots cross refactorization") {
  std::mt19937 rng(77);
  DenseLp p = random_lp(rng, 60, 80);
  p.b.array() = p.b.array().abs() + 1.0;
  LpModel lp = build(p);
  LpOptions opts;
  opts.refactor_every = 7;
  auto a = lp.solve(opts);
  LpModel lp2 = build(p);
  auto b = lp2.solve();
  REQUIRE(a.status == LpStatus::Optimal);
  CHECK(a.obj == doctest::Approx(b.obj).epsilon(1e-9));
}

TEST_CASE("dump lists rows") {
  LpModel lp;
  lp.add_col(0, 1, 1.0);
  lp.add_row(std::vector<SparseEntry>{{0, 2.0}}, Relation::LessEq, 1.0);
  std::ostringstream os;
  lp.dump(os);
  CHECK(os.str().find("r0:") != std::string::npos);
}

TEST_CASE("phase one leaves an infeasible one-sided logical at its finite bound") {
  LpModel m;
  const int x0 = m.add_col(-kInf, kInf, -1.0);
  const int x1 = m.add_col(1.0, 1.0, 0.0);
  const int x2 = m.add_col(-kInf, kInf, 0.0);
  m.add_row(std::vector<SparseEntry>{{x0, -1.0}, {x1, 1.0}}, Relation::LessEq, 0.0);
  m.add_row(std::vector<SparseEntry>{{x0, -1.0}, {x2, 0.5}}, Relation::LessEq, 0.0);
  m.add_row(std::vector<SparseEntry>{{x2, 1.0}, {x1, 1.0}}, Relation::LessEq, 0.0);
  const auto r = m.solve();
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.x[x0] == doctest::Approx(1.0));
  CHECK(r.x.allFinite());
}
