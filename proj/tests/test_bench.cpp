#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "micqp/bench.hpp"
#include "micqp/conic.hpp"
#include "micqp/portfolio.hpp"

using namespace micqp;
using namespace micqp::bench;

namespace {

RunRecord rec(const std::string& inst, const std::string& cfg, double t, bool solved = true) {
  RunRecord r;
  r.instance = inst;
  r.config = cfg;
  r.time_s = t;
  r.status = solved ? SolveStatus::Optimal : SolveStatus::TimeLimit;
  return r;
}

const SummaryRow& row(const std::vector<SummaryRow>& rows, const std::string& id) {
  for (const auto& r : rows)
    if (r.config == id) return r;
  FAIL("missing row " << id);
  return rows.front();
}

const ProfileCurve& curve(const std::vector<ProfileCurve>& cs, const std::string& id) {
  for (const auto& c : cs)
    if (c.config == id) return c;
  FAIL("missing curve " << id);
  return cs.front();
}

std::vector<NamedInstance> small_suite() {
  std::vector<NamedInstance> out;
  int k = 0;
  for (auto fam : {portfolio::Family::Classical, portfolio::Family::Robust})
    for (const auto& inst : portfolio::gen_random_suite(fam, 5, 2, 13)) out.push_back({"p" + std::to_string(k++), inst});
  return out;
}

}  // namespace

TEST_CASE("configuration lookup") {
  const auto& cs = standard_configs();
  REQUIRE(cs.size() == 6);
  CHECK(cs[0].id == "OA");
  CHECK(cs[3].id == "SepLP");
  CHECK(cs[3].reform == "sep");
  CHECK(find_config("TowerLP").reform == "tower");
  CHECK_THROWS_AS(find_config("CPLEX"), DomainError);
  CHECK(parse_config_list("all").size() == 6);
  const auto two = parse_config_list("OA,TowerSepLP");
  REQUIRE(two.size() == 2);
  CHECK(two[1].id == "TowerSepLP");
  CHECK_THROWS_AS(parse_config_list("OA,nope"), DomainError);
  CHECK_THROWS_AS(parse_config_list(""), DomainError);
}

TEST_CASE("summary statistics") {
  SUBCASE("wins split") {
    const auto rows = summarize({rec("i1", "A", 1), rec("i1", "B", 2), rec("i2", "A", 2), rec("i2", "B", 1)});
    CHECK(row(rows, "A").wins == 1);
    CHECK(row(rows, "B").wins == 1);
    CHECK(row(rows, "A").min == 1.0);
    CHECK(row(rows, "A").max == 2.0);
    CHECK(row(rows, "A").avg == doctest::Approx(1.5));
    CHECK(row(rows, "A").std == doctest::Approx(std::sqrt(0.5)));
  }
  SUBCASE("one percent window") {
    const auto rows = summarize({rec("i1", "A", 1.0), rec("i1", "B", 1.005)});
    CHECK(row(rows, "A").wins == 1);
    CHECK(row(rows, "B").wins == 0);
    CHECK(row(rows, "B").win1 == 1);
    CHECK(row(rows, "B").win10 == 1);
    const auto rows2 = summarize({rec("i1", "A", 1.0), rec("i1", "B", 1.05)});
    CHECK(row(rows2, "B").win1 == 0);
    CHECK(row(rows2, "B").win10 == 1);
  }
  SUBCASE("single config wins everything it solves") {
    const auto rows = summarize({rec("i1", "A", 1), rec("i2", "A", 3), rec("i3", "A", 2)});
    CHECK(row(rows, "A").wins == 3);
    CHECK(row(rows, "A").records == 3);
    CHECK(row(rows, "A").solved == 3);
  }
  SUBCASE("ties go to the earlier standard config") {
    const auto rows = summarize({rec("i1", "TowerLP", 1), rec("i1", "OA", 1), rec("i1", "zeta", 1)});
    CHECK(row(rows, "OA").wins == 1);
    CHECK(row(rows, "TowerLP").wins == 0);
    CHECK(row(rows, "TowerLP").win1 == 1);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].config == "OA");
    CHECK(rows[1].config == "TowerLP");
    CHECK(rows[2].config == "zeta");
  }
  SUBCASE("unsolved records never win") {
    const auto rows = summarize({rec("i1", "A", 0.1, false), rec("i1", "B", 5), rec("i2", "A", 1, false)});
    CHECK(row(rows, "A").wins == 0);
    CHECK(row(rows, "A").win10 == 0);
    CHECK(row(rows, "A").solved == 0);
    CHECK(row(rows, "B").wins == 1);
  }
}

TEST_CASE("performance profile") {
  SUBCASE("two configs, one instance") {
    const auto cs = profile({rec("i1", "A", 1), rec("i1", "B", 2)});
    CHECK(profile_value(curve(cs, "A"), 1.0) == 1.0);
    CHECK(profile_value(curve(cs, "B"), 1.0) == 0.0);
    CHECK(profile_value(curve(cs, "B"), 1.999) == 0.0);
    CHECK(profile_value(curve(cs, "B"), 2.0) == 1.0);
  }
  SUBCASE("equal times") {
    const auto cs = profile({rec("i1", "A", 3), rec("i1", "B", 3), rec("i2", "A", 1), rec("i2", "B", 1)});
    for (const auto& c : cs) CHECK(profile_value(c, 1.0) == 1.0);
  }
  SUBCASE("all timeouts") {
    const auto cs = profile({rec("i1", "A", 1), rec("i1", "B", 60, false), rec("i2", "A", 2), rec("i2", "B", 60, false)});
    for (double tau : {1.0, 10.0, 1e6, 1e300}) CHECK(profile_value(curve(cs, "B"), tau) == 0.0);
    CHECK(profile_value(curve(cs, "A"), 1.0) == 1.0);
  }
  SUBCASE("curve shape on random data") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    std::vector<RunRecord> rs;
    for (int i = 0; i < 30; ++i)
      for (const char* c : {"A", "B", "C"}) rs.push_back(rec("i" + std::to_string(i), c, u(rng), u(rng) < 8.0));
    for (const auto& c : profile(rs)) {
      CHECK(c.points.front() == std::make_pair(1.0, c.points.front().second));
      for (std::size_t k = 1; k < c.points.size(); ++k) {
        CHECK(c.points[k].first > c.points[k - 1].first);
        CHECK(c.points[k].second >= c.points[k - 1].second);
      }
      CHECK(c.points.back().second <= 1.0);
      // independent count of instances within tau of the best
      for (double tau : {1.0, 1.5, 3.0, 100.0}) {
        int hit = 0;
        for (int i = 0; i < 30; ++i) {
          double best = kInf, mine = kInf;
          for (const auto& r : rs)
            if (r.instance == "i" + std::to_string(i) && r.solved()) {
              best = std::min(best, r.time_s);
              if (r.config == c.config) mine = r.time_s;
            }
          if (std::isfinite(mine) && mine <= tau * best) ++hit;
        }
        CHECK(profile_value(c, tau) == doctest::Approx(hit / 30.0));
      }
    }
  }
}

TEST_CASE("order independence") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  std::vector<RunRecord> rs;
  for (int i = 0; i < 12; ++i)
    for (const auto& c : standard_configs()) rs.push_back(rec("i" + std::to_string(i), c.id, u(rng), u(rng) < 4.0));
  const auto s0 = summarize(rs);
  const auto p0 = profile(rs);
  int wins = 0;
  for (const auto& r : s0) wins += r.wins;
  CHECK(wins <= 12);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(rs.begin(), rs.end(), rng);
    const auto s = summarize(rs);
    const auto p = profile(rs);
    REQUIRE(s.size() == s0.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].config == s0[i].config);
      CHECK(s[i].wins == s0[i].wins);
      CHECK(s[i].win1 == s0[i].win1);
      CHECK(s[i].win10 == s0[i].win10);
      CHECK(s[i].avg == doctest::Approx(s0[i].avg).epsilon(1e-14));
      CHECK(s[i].std == doctest::Approx(s0[i].std).epsilon(1e-12));
      CHECK(p[i].points == p0[i].points);
    }
  }
}

TEST_CASE("csv round trip") {
  std::vector<RunRecord> rs;
  auto a = rec("fam,with \"comma\"", "OA", 0.1 + 0.2);
  a.nodes = 17;
  a.cuts = 3;
  a.lp_solves = 40;
  a.conic_solves = 2;
  a.objective = 1.2345678901234567;
  a.max_violation = -2.5e-17;
  rs.push_back(a);
  auto b = rec("plain", "TowerSepLP", 60.0, false);
  b.objective = -kInf;
  b.max_violation = kInf;
  rs.push_back(b);
  auto c = rec("inf", "SepLP", 1e-300);
  c.status = SolveStatus::Infeasible;
  rs.push_back(c);

  std::stringstream ss;
  write_csv(ss, rs);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header == "instance,config,status,time_s,nodes,cuts,lp_solves,conic_solves,objective,max_violation");
  const auto back = read_csv(ss);
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) CHECK(back[i] == rs[i]);

  const auto dir = std::filesystem::temp_directory_path() / "micqp_bench_csv";
  std::filesystem::create_directories(dir);
  write_csv(dir / "r.csv", rs);
  CHECK(read_csv(dir / "r.csv") == rs);
  std::filesystem::remove_all(dir);

  std::stringstream bad("instance,config\nx,y\n");
  CHECK_THROWS(read_csv(bad));
}

TEST_CASE("suite runs") {
  const auto suite = small_suite();
  const auto cfgs = parse_config_list("OA,SepLP");
  const auto par = run_suite(suite, cfgs, 30.0, 2);
  const auto ser = run_suite_serial(suite, cfgs, 30.0);
  REQUIRE(par.size() == suite.size() * cfgs.size());
  REQUIRE(ser.size() == par.size());
  for (std::size_t k = 0; k < par.size(); ++k) {
    CHECK(par[k].instance == suite[k / 2].id);
    CHECK(par[k].config == cfgs[k % 2].id);
    CHECK(par[k].status == ser[k].status);
    CHECK(par[k].nodes == ser[k].nodes);
    CHECK(par[k].cuts == ser[k].cuts);
    CHECK(par[k].objective == ser[k].objective);
    CHECK(par[k].time_s >= 0.0);
    CHECK(par[k].status == SolveStatus::Optimal);
    CHECK(par[k].max_violation <= 1e-6);
  }
  for (std::size_t k = 0; k < par.size(); k += 2) CHECK(par[k].objective == doctest::Approx(par[k + 1].objective).epsilon(1e-6));

  // a failing configuration is recorded, not thrown
  Config broken{"broken", "simplex", "none", 0.01};
  const auto r = run_suite(suite, {broken}, 5.0, 1);
  REQUIRE(r.size() == suite.size());
  for (const auto& x : r) CHECK(x.status == SolveStatus::IterLimit);

  const auto dir = std::filesystem::temp_directory_path() / "micqp_bench_suite";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (const auto& ni : suite) write_instance(ni.inst, dir / (ni.id + ".json"));
  const auto loaded = load_suite(dir);
  REQUIRE(loaded.size() == suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) {
    CHECK(loaded[i].id == suite[i].id);
    CHECK(loaded[i].inst == suite[i].inst);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_suite(dir), IoError);
}

TEST_CASE("reformulated runs report original variables") {
  const auto inst = portfolio::gen_random_suite(portfolio::Family::Shortfall, 5, 1, 3)[0];
  for (const auto& c : standard_configs()) {
    const auto r = solve_config(inst, c);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x.size() == inst.n);
    CHECK(r.objective == doctest::Approx(inst.c.dot(r.x)).epsilon(1e-9));
    CHECK(r.max_violation <= 1e-6);
  }
}
