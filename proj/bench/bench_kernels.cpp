#include <benchmark/benchmark.h>

#include <omp.h>

#include "micqp/bench.hpp"
#include "micqp/portfolio.hpp"
#include "micqp/relax.hpp"

using namespace micqp;

namespace {

struct QualityModel {
  lp::LpModel model;
  relax::ConeVarMap map;
};

QualityModel quality_model(int d) {
  QualityModel q;
  q.map = relax::add_cone_columns(q.model, d);
  relax::attach_lifted_eps(q.model, q.map, 0.01);
  return q;
}

std::vector<bench::NamedInstance> suite(int n, int count) {
  std::vector<bench::NamedInstance> out;
  for (auto fam : {portfolio::Family::Classical, portfolio::Family::Shortfall, portfolio::Family::Robust}) {
    const auto insts = portfolio::gen_random_suite(fam, n, count, 1);
    for (std::size_t i = 0; i < insts.size(); ++i)
      out.push_back({std::string(portfolio::to_string(fam)) + std::to_string(i), insts[i]});
  }
  return out;
}

void BM_QualitySerial(benchmark::State& state) {
  const auto q = quality_model(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(relax::measure_quality_serial(q.model, q.map, 64, 3));
}

void BM_QualityParallel(benchmark::State& state) {
  const auto q = quality_model(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(relax::measure_quality(q.model, q.map, 64, 3));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_SuiteSerial(benchmark::State& state) {
  const auto s = suite(static_cast<int>(state.range(0)), 2);
  const auto cfgs = bench::parse_config_list("OA,SepLP,TowerLP");
  for (auto _ : state) benchmark::DoNotOptimize(bench::run_suite_serial(s, cfgs, 60.0));
}

void BM_SuiteParallel(benchmark::State& state) {
  const auto s = suite(static_cast<int>(state.range(0)), 2);
  const auto cfgs = bench::parse_config_list("OA,SepLP,TowerLP");
  const int threads = omp_get_max_threads();
  for (auto _ : state) benchmark::DoNotOptimize(bench::run_suite(s, cfgs, 60.0, threads));
  state.counters["threads"] = threads;
}

}  // namespace

BENCHMARK(BM_QualitySerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QualityParallel)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SuiteSerial)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SuiteParallel)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
