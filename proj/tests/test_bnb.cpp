#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "barrier.hpp"
#include "micqp/bnb.hpp"
#include "random_instances.hpp"

using namespace micqp;
using namespace micqp::bnb;
using testsupport::barrier_solve;
using testsupport::BarrierStatus;

namespace {

struct Reference {
  bool ambiguous = false;
  bool feasible = false;
  double obj = -kInf;
};

// Enumerates integer assignments and solves each continuous part with the
// interior point reference.
Reference enumerate(const MicqpInstance& inst) {
  Reference ref;
  testsupport::for_each_integer_point(inst, [&](const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
    auto r = barrier_solve(inst, l, u);
    if (r.status == BarrierStatus::Ambiguous) ref.ambiguous = true;
    if (r.status != BarrierStatus::Optimal) return;
    ref.feasible = true;
    ref.obj = std::max(ref.obj, r.obj);
  });
  return ref;
}

bool rows_and_bounds_ok(const MicqpInstance& inst, const Eigen::VectorXd& x, double tol) {
  for (int j = 0; j < inst.n; ++j)
    if (x[j] < inst.lb[j] - tol || x[j] > inst.ub[j] + tol) return false;
  if (inst.num_rows() > 0 && ((inst.E * x - inst.h).array() > tol).any()) return false;
  return max_integrality_gap(inst, x) <= 1e-6;
}

// max x1 + x2 over integer x with ||x|| <= 1.2 and 0 <= x <= 2.
MicqpInstance toy_disk() {
  auto inst = make_instance(2);
  inst.c << 1.0, 1.0;
  inst.lb.setZero();
  inst.ub.setConstant(2.0);
  inst.int_vars = {0, 1};
  ConeBlock cone;
  cone.A = Eigen::MatrixXd::Identity(2, 2);
  cone.b = Eigen::VectorXd::Zero(2);
  cone.a = Eigen::VectorXd::Zero(2);
  cone.b0 = 1.2;
  inst.cones.push_back(cone);
  return inst;
}

// Binary points inside the ball around (1/2, ..., 1/2) of radius sqrt(n - 1)/2: none.
MicqpInstance empty_ball(int n) {
  auto inst = make_instance(n);
  inst.c.setOnes();
  inst.lb.setZero();
  inst.ub.setOnes();
  for (int j = 0; j < n; ++j) inst.int_vars.push_back(j);
  ConeBlock cone;
  cone.A = Eigen::MatrixXd::Identity(n, n);
  cone.b = Eigen::VectorXd::Constant(n, -0.5);
  cone.a = Eigen::VectorXd::Zero(n);
  cone.b0 = std::sqrt((n - 1) / 4.0);
  inst.cones.push_back(cone);
  return inst;
}

std::vector<LiftedConfig> all_configs() {
  std::vector<LiftedConfig> out;
  for (auto strategy : {RefineStrategy::BranchBased, RefineStrategy::CutBased})
    for (bool st : {true, false})
      for (auto dyn : {DynamicKind::Separable, DynamicKind::Flat}) out.push_back({0.01, strategy, st, dyn});
  return out;
}

}  // namespace

TEST_CASE("branching variable selection") {
  CHECK(branch_variable_selection(Eigen::Vector2d(0.5, 0.2), {0, 1}) == 0);
  CHECK(branch_variable_selection(Eigen::Vector2d(1.0, 0.4), {0, 1}) == 1);
  CHECK(branch_variable_selection(Eigen::Vector2d(0.5, 0.5), {0, 1}) == 0);
  CHECK(branch_variable_selection(Eigen::Vector3d(0.5, 0.3, 2.5), {1, 2}) == 2);
  CHECK_THROWS_AS(branch_variable_selection(Eigen::Vector2d(1.0, -2.0), {0, 1}), NoFractional);
  CHECK_THROWS_AS(branch_variable_selection(Eigen::Vector2d(1.0, 0.5), {0}), NoFractional);
  CHECK_THROWS_AS(branch_variable_selection(Eigen::Vector2d(1.0, 1.0 + 1e-8), {0, 1}), NoFractional);
  CHECK_THROWS_AS(branch_variable_selection(Eigen::Vector2d(1.0, 0.5), {2}), IndexError);
}

TEST_CASE("pure integer program without cones") {
  auto inst = make_instance(2);
  inst.c << 1.0, 1.0;
  inst.lb.setZero();
  inst.ub.setConstant(10.0);
  inst.int_vars = {0, 1};
  add_row(inst, Eigen::Vector2d(2.0, 2.0), 7.0);
  for (auto r : {solve_oa(inst), solve_lifted(inst, {})}) {
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(3.0));
    CHECK(r.bound == doctest::Approx(3.0));
  }
}

TEST_CASE("integer points of a small disk") {
  auto inst = toy_disk();
  auto oa = solve_oa(inst);
  REQUIRE(oa.status == SolveStatus::Optimal);
  CHECK(oa.objective == doctest::Approx(1.0));
  for (const auto& cfg : all_configs()) {
    auto r = solve_lifted(inst, cfg);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(1.0));
    CHECK(cones_satisfied(inst, r.x, 1e-6));
  }
}

TEST_CASE("binary points outside a ball") {
  auto inst = empty_ball(4);
  auto oa = solve_oa(inst);
  CHECK(oa.status == SolveStatus::Infeasible);
  CHECK(oa.stats.cuts >= 16);
  CHECK_FALSE(oa.has_incumbent());
  for (const auto& cfg : all_configs()) {
    auto r = solve_lifted(inst, cfg);
    CHECK(r.status == SolveStatus::Infeasible);
    CHECK(r.objective == -kInf);
  }
}

TEST_CASE("unbounded root relaxation") {
  auto inst = make_instance(2);
  inst.c << 1.0, 0.0;
  inst.int_vars = {0};
  CHECK(solve_lifted(inst, {}).status == SolveStatus::Unbounded);
  CHECK(solve_oa(inst).status == SolveStatus::Unbounded);
}

TEST_CASE("all solvers agree with enumeration on random instances") {
  std::mt19937_64 rng(21);
  testsupport::RandomShape shape;
  shape.max_n = 5;
  shape.max_int = 3;
  int compared = 0, infeasible = 0;
  for (int t = 0; t < 30; ++t) {
    auto inst = testsupport::random_micqp(rng, shape);
    auto ref = enumerate(inst);
    if (ref.ambiguous) continue;
    ++compared;
    if (!ref.feasible) ++infeasible;
    std::vector<SolveResult> results{solve_oa(inst)};
    for (const auto& cfg : all_configs()) results.push_back(solve_lifted(inst, cfg));
    for (std::size_t k = 0; k < results.size(); ++k) {
      CAPTURE(t);
      CAPTURE(k);
      const auto& r = results[k];
      if (!ref.feasible) {
        CHECK(r.status == SolveStatus::Infeasible);
        continue;
      }
      REQUIRE(r.status == SolveStatus::Optimal);
      CHECK(std::abs(r.objective - ref.obj) <= 1e-5 * std::max(1.0, std::abs(ref.obj)));
      CHECK(r.bound >= r.objective - 1e-9);
      CHECK(rows_and_bounds_ok(inst, r.x, 1e-7));
      CHECK(cones_satisfied(inst, r.x, 1e-6));
      CHECK(inst.c.dot(r.x) == doctest::Approx(r.objective).epsilon(1e-9));
    }
  }
  CHECK(compared >= 25);
  MESSAGE("compared " << compared << ", infeasible " << infeasible);
}

TEST_CASE("branch-based refinement never grows the tangent pools") {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 10; ++t) {
    auto inst = testsupport::random_micqp(rng);
    auto r = solve_lifted(inst, 0.01, RefineStrategy::BranchBased, true);
    CHECK(r.stats.gamma_growth == 0);
    CHECK(r.stats.cuts == 0);
  }
}

TEST_CASE("runs are deterministic and pruning does not change the optimum") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 8; ++t) {
    auto inst = testsupport::random_micqp(rng);
    LiftedConfig cfg;
    auto a = solve_lifted(inst, cfg);
    auto b = solve_lifted(inst, cfg);
    CHECK(a.status == b.status);
    CHECK(a.stats.nodes == b.stats.nodes);
    CHECK(a.stats.cuts == b.stats.cuts);
    CHECK(a.objective == b.objective);
    Options keep;
    keep.prune = false;
    auto c = solve_lifted(inst, cfg, keep);
    CHECK(c.status == a.status);
    CHECK(c.stats.nodes >= a.stats.nodes);
    if (a.status == SolveStatus::Optimal) CHECK(std::abs(c.objective - a.objective) <= 1e-6);
  }
}

TEST_CASE("limits stop the search") {
  auto inst = empty_ball(10);
  Options opts;
  opts.limits.max_nodes = 5;
  auto r = solve_lifted(inst, {}, opts);
  CHECK(r.status == SolveStatus::IterLimit);
  CHECK(r.stats.nodes == 5);
  CHECK(r.bound > 0.0);
  Options cuts;
  cuts.limits.max_cuts = 3;
  auto o = solve_oa(inst, cuts);
  CHECK(o.status == SolveStatus::IterLimit);
  Options time;
  time.limits.time_limit = 1e-9;
  CHECK(solve_lifted(inst, {}, time).status == SolveStatus::TimeLimit);
}

TEST_CASE("trace records parse and describe each node") {
  auto inst = toy_disk();
  std::ostringstream os;
  Options opts;
  opts.trace = &os;
  auto r = solve_lifted(inst, {}, opts);
  REQUIRE(r.status == SolveStatus::Optimal);
  std::istringstream is(os.str());
  std::string line;
  long records = 0;
  bool saw_incumbent = false;
  while (std::getline(is, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.contains("node"));
    CHECK(j.contains("action"));
    CHECK(j.contains("bound"));
    if (j["action"] == "incumbent" || j["action"] == "refine_incumbent") saw_incumbent = true;
    ++records;
  }
  CHECK(records == r.stats.nodes);
  CHECK(saw_incumbent);
}

TEST_CASE("invalid configuration") {
  auto inst = toy_disk();
  CHECK_THROWS_AS(solve_lifted(inst, 0.7, RefineStrategy::CutBased, true), DomainError);
  CHECK_THROWS_AS(solve_oa(inst, std::vector<relax::OmegaPool>{}), DimensionError);
}
