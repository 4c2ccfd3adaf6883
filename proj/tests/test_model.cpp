#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "micqp/model.hpp"

using namespace micqp;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("micqp_test_" + name);
}

MicqpInstance identity_cone_instance() {
  return parse_instance(R"({"n":2,"maximize":true,"c":[1,0],"E":[],"h":[],
    "cones":[{"A":[[1,0],[0,1]],"b":[0,0],"a":[0,0],"b0":1}],
    "int_vars":[0],"lb":["-inf","-inf"],"ub":["inf","inf"]})");
}

MicqpInstance random_instance(std::mt19937& rng) {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> nd(1, 5);
  const int n = nd(rng);
  MicqpInstance inst = make_instance(n);
  for (int j = 0; j < n; ++j) inst.c[j] = g(rng) / 3.0;
  const int m = nd(rng) - 1;
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd r(n);
    for (int j = 0; j < n; ++j) r[j] = g(rng);
    add_row(inst, r, g(rng) * 1e-3 + 1.0 / 7.0);
  }
  for (int l = 0; l < nd(rng) - 1; ++l) {
    ConeBlock cb;
    const int d = nd(rng);
    cb.A = Eigen::MatrixXd::NullaryExpr(d, n, [&] { return g(rng); });
    cb.b = Eigen::VectorXd::NullaryExpr(d, [&] { return g(rng); });
    cb.a = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
    cb.b0 = std::exp(g(rng));
    inst.cones.push_back(cb);
  }
  for (int j = 0; j < n; j += 2) inst.int_vars.push_back(j);
  for (int j = 0; j < n; ++j) {
    inst.lb[j] = j % 3 == 0 ? -kInf : -g(rng) * g(rng) - 1.0;
    inst.ub[j] = j % 3 == 1 ? kInf : inst.lb[j] + std::abs(g(rng)) + 1.0;
  }
  return inst;
}

}  // namespace

TEST_CASE("read identity cone instance") {
  MicqpInstance inst = identity_cone_instance();
  CHECK(inst.n == 2);
  CHECK(inst.num_cones() == 1);
  CHECK(inst.cones[0].dim() == 2);
  CHECK(inst.int_vars == std::vector<int>{0});
  CHECK(std::isinf(inst.ub[0]));
}

TEST_CASE("dimension mismatch names the field") {
  try {
    parse_instance(R"({"n":2,"maximize":true,"c":[1,0],"E":[],"h":[],
      "cones":[{"A":[[1,0],[0,1],[1,1]],"b":[0,0],"a":[0,0],"b0":1}],
      "int_vars":[],"lb":[0,0],"ub":[1,1]})");
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("cones[0].b") != std::string::npos);
  }
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_instance("{not json"), ParseError);
  CHECK_THROWS_AS(parse_instance(R"({"n":1,"maximize":true,"c":[1],"E":[],"h":[],"cones":[],
      "int_vars":[],"lb":[0],"ub":[1],"extra":1})"), ParseError);
  CHECK_THROWS_AS(parse_instance(R"({"n":1,"maximize":true,"c":[1],"E":[],"h":[],"cones":[],
      "int_vars":[],"lb":[0]})"), ParseError);
  CHECK_THROWS_AS(parse_instance(R"({"n":1,"maximize":true,"c":[1],"E":[],"h":[],"cones":[],
      "int_vars":[],"lb":[2],"ub":[1]})"), DomainError);
  CHECK_THROWS_AS(parse_instance(R"({"n":2,"maximize":true,"c":[1,0],"E":[],"h":[],"cones":[],
      "int_vars":[1,0],"lb":[0,0],"ub":[1,1]})"), DomainError);
}

TEST_CASE("round trip is exact") {
  std::mt19937 rng(11);
  for (int t = 0; t < 50; ++t) {
    MicqpInstance inst = random_instance(rng);
    inst.minimize_input = t % 2 == 0;
    const auto path = temp_file("rt.json");
    write_instance(inst, path);
    MicqpInstance back = read_instance(path);
    CHECK(back == inst);
    std::filesystem::remove(path);
  }
}

TEST_CASE("infinite bound serialized as token") {
  MicqpInstance inst = make_instance(1);
  inst.lb[0] = 0.0;
  inst.ub[0] = kInf;
  const std::string text = format_instance(inst);
  CHECK(text.find("\"inf\"") != std::string::npos);
  CHECK(parse_instance(text) == inst);
}

TEST_CASE("empty cone list") {
  MicqpInstance inst = make_instance(3);
  MicqpInstance back = parse_instance(format_instance(inst));
  CHECK(back.num_cones() == 0);
  CHECK(std::isinf(max_cone_violation(back, Eigen::VectorXd::Zero(3))));
  CHECK(max_cone_violation(back, Eigen::VectorXd::Zero(3)) < 0);
}

TEST_CASE("minimization negated internally") {
  MicqpInstance inst = parse_instance(R"({"n":1,"maximize":false,"c":[2],"E":[],"h":[],"cones":[],
      "int_vars":[],"lb":[0],"ub":[1]})");
  CHECK(inst.c[0] == -2.0);
  CHECK(inst.reported_objective(-2.0) == 2.0);
}

TEST_CASE("max cone violation") {
  MicqpInstance inst = identity_cone_instance();
  CHECK(max_cone_violation(inst, Eigen::Vector2d(1, 1)) == doctest::Approx(1.0));
  CHECK(max_cone_violation(inst, Eigen::Vector2d(0, 0)) == doctest::Approx(-1.0));
}

TEST_CASE("violation invariant under cone permutation and zero on the boundary") {
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 30; ++t) {
    MicqpInstance inst = random_instance(rng);
    Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(inst.n, [&] { return g(rng); });
    const double v = max_cone_violation(inst, x);
    std::reverse(inst.cones.begin(), inst.cones.end());
    CHECK(max_cone_violation(inst, x) == v);
    // force every cone tight at x
    for (auto& cb : inst.cones) cb.b0 = (cb.A * x + cb.b).norm() - cb.a.dot(x);
    if (inst.num_cones() > 0) {
      double scale = 1.0;
      for (const auto& cb : inst.cones) scale = std::max(scale, (cb.A * x + cb.b).squaredNorm());
      CHECK(std::abs(max_cone_violation(inst, x)) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("helpers") {
  MicqpInstance inst = identity_cone_instance();
  const int j = add_var(inst, 0.0, 1.0, 2.0, true);
  CHECK(j == 2);
  CHECK(inst.cones[0].A.cols() == 3);
  CHECK(inst.is_integer(2));
  add_row(inst, Eigen::Vector3d(1, 1, 1), 4.0);
  CHECK(inst.num_rows() == 1);
  CHECK(max_integrality_gap(inst, Eigen::Vector3d(0.25, 9.0, 1.0)) == doctest::Approx(0.25));
  CHECK(cones_satisfied(inst, Eigen::Vector3d(0.6, 0.8, 0.0), 1e-9));
  CHECK_FALSE(cones_satisfied(inst, Eigen::Vector3d(0.7, 0.8, 0.0), 1e-9));
}
