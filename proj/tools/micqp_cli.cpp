#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "micqp/bench.hpp"
#include "micqp/bnb.hpp"
#include "micqp/portfolio.hpp"

using namespace micqp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

int cmd_gen(const std::string& family, int n, int count, std::uint64_t seed, const std::string& out) {
  if (family == "fball") {
    const fs::path p = fs::path(out).extension() == ".json" ? fs::path(out) : fs::path(out) / ("fball_" + std::to_string(n) + ".json");
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_instance(portfolio::gen_fball(n), p);
    std::cout << p.string() << '\n';
    return 0;
  }
  const auto fam = portfolio::family_from_string(family);
  fs::create_directories(out);
  const auto suite = portfolio::gen_random_suite(fam, n, count, seed);
  for (std::size_t i = 0; i < suite.size(); ++i) {
    std::ostringstream name;
    name << family << "_n" << n << "_" << std::setw(3) << std::setfill('0') << i << ".json";
    write_instance(suite[i], fs::path(out) / name.str());
  }
  std::cout << suite.size() << " instances written to " << out << '\n';
  return 0;
}

struct SolveArgs {
  std::string in;
  std::string config;
  std::string algorithm = "lifted-cut";
  std::string reform = "none";
  double eps = 0.01;
  double time_limit = 60.0;
  std::uint64_t seed = 0;
  std::string trace;
  bool trace_set = false;
  long max_nodes = 0;
  long max_cuts = 0;
  std::string solution_out;
};

int cmd_solve(const SolveArgs& a) {
  const auto inst = read_instance(a.in);
  bench::Config cfg = a.config.empty() ? bench::Config{"custom", a.algorithm, a.reform, a.eps} : bench::find_config(a.config);
  if (!a.config.empty()) cfg.eps = a.eps;

  bnb::Options opts;
  opts.limits.time_limit = a.time_limit;
  if (a.max_nodes > 0) opts.limits.max_nodes = a.max_nodes;
  if (a.max_cuts > 0) opts.limits.max_cuts = a.max_cuts;
  std::unique_ptr<std::ofstream> trace_file;
  if (a.trace_set) {
    if (a.trace.empty() || a.trace == "-") {
      opts.trace = &std::cerr;
    } else {
      trace_file = std::make_unique<std::ofstream>(a.trace);
      if (!*trace_file) throw IoError("cannot open trace file " + a.trace);
      opts.trace = trace_file.get();
    }
  }
  const auto r = bench::solve_config(inst, cfg, opts);

  json out;
  out["instance"] = a.in;
  out["algorithm"] = cfg.algorithm;
  out["reform"] = cfg.reform;
  out["eps"] = cfg.eps;
  out["seed"] = a.seed;
  out["status"] = to_string(r.status);
  out["objective"] = number(inst.reported_objective(r.has_incumbent() ? r.objective : -kInf));
  out["bound"] = number(inst.reported_objective(r.bound));
  out["nodes"] = r.stats.nodes;
  out["cuts"] = r.stats.cuts;
  out["lp_solves"] = r.stats.lp_solves;
  out["conic_solves"] = r.stats.conic_solves;
  out["time_s"] = r.stats.time_s;
  out["max_violation"] = number(r.max_violation);
  if (r.has_incumbent()) out["x"] = std::vector<double>(r.x.data(), r.x.data() + r.x.size());
  if (!a.solution_out.empty()) {
    std::ofstream f(a.solution_out);
    if (!f) throw IoError("cannot open " + a.solution_out);
    f << out.dump(2) << '\n';
  }
  out.erase("x");
  std::cout << out.dump(2) << '\n';
  return 0;
}

void print_summary(const std::vector<bench::SummaryRow>& rows) {
  std::cout << std::left << std::setw(18) << "config" << std::right << std::setw(8) << "solved" << std::setw(10) << "min"
            << std::setw(10) << "avg" << std::setw(10) << "max" << std::setw(10) << "std" << std::setw(6) << "wins"
            << std::setw(8) << "1%win" << std::setw(8) << "10%win" << '\n';
  std::cout << std::fixed << std::setprecision(3);
  for (const auto& r : rows)
    std::cout << std::left << std::setw(18) << r.config << std::right << std::setw(4) << r.solved << '/' << std::setw(3)
              << r.records << std::setw(10) << r.min << std::setw(10) << r.avg << std::setw(10) << r.max
              << std::setw(10) << r.std << std::setw(6) << r.wins << std::setw(8) << r.win1 << std::setw(8) << r.win10
              << '\n';
}

int cmd_bench(const std::string& suite_dir, const std::string& configs, const std::string& out, double time_limit,
              int threads, const std::string& summary_out) {
  const auto suite = bench::load_suite(suite_dir);
  if (suite.empty()) throw IoError("no instances in " + suite_dir);
  const auto cfgs = bench::parse_config_list(configs);
  const auto records = bench::run_suite(suite, cfgs, time_limit, threads);
  bench::write_csv(fs::path(out), records);
  const auto rows = bench::summarize(records);
  if (!summary_out.empty()) {
    std::ofstream f(summary_out);
    if (!f) throw IoError("cannot open " + summary_out);
    bench::write_summary_csv(f, rows);
  }
  print_summary(rows);
  return 0;
}

int cmd_profile(const std::string& in, const std::string& out) {
  const auto records = bench::read_csv(fs::path(in));
  const auto curves = bench::profile(records);
  std::ofstream f(out);
  if (!f) throw IoError("cannot open " + out);
  bench::write_profile_csv(f, curves);
  print_summary(bench::summarize(records));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-integer conic quadratic solver based on lifted polyhedral relaxations"};
  app.require_subcommand(1);

  std::string family = "classical", gen_out = "instances";
  int gen_n = 10, gen_count = 10;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("gen", "Write portfolio or fball instances");
  gen->add_option("--family", family, "classical, shortfall, robust or fball")->capture_default_str();
  gen->add_option("--n", gen_n, "Number of assets (dimension for fball)")->capture_default_str()->check(CLI::Range(2, 100000));
  gen->add_option("--count", gen_count, "Instances to generate")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Suite seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory (or .json file for fball)")->capture_default_str();

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Solve one instance");
  solve->add_option("--in", sa.in, "Instance file")->required()->check(CLI::ExistingFile);
  solve->add_option("--config", sa.config, "Named configuration (overrides --algorithm/--reform)");
  solve->add_option("--algorithm", sa.algorithm, "oa, lifted-branch, lifted-cut or flat-cut")->capture_default_str();
  solve->add_option("--reform", sa.reform, "none, sep, tower, towersep or persp")->capture_default_str();
  solve->add_option("--eps", sa.eps, "Static relaxation quality")->capture_default_str()->check(CLI::PositiveNumber);
  solve->add_option("--timelimit", sa.time_limit, "Seconds")->capture_default_str()->check(CLI::PositiveNumber);
  solve->add_option("--seed", sa.seed, "Recorded in the output; the solver is deterministic")->capture_default_str();
  solve->add_option("--max-nodes", sa.max_nodes, "Node limit (0: none)");
  solve->add_option("--max-cuts", sa.max_cuts, "Cut limit (0: none)");
  solve->add_option("--solution", sa.solution_out, "Write the result with x as JSON");
  auto* trace_opt = solve->add_option("--trace", sa.trace, "Node log as JSON lines (file, or stderr when no value)")
                        ->expected(0, 1);

  std::string suite_dir, configs = "all", bench_out = "results.csv", summary_out;
  double bench_tl = 60.0;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* bench_cmd = app.add_subcommand("bench", "Run configurations over an instance directory");
  bench_cmd->add_option("--suite", suite_dir, "Directory of instance files")->required()->check(CLI::ExistingDirectory);
  bench_cmd->add_option("--configs", configs, "Comma-separated config ids or 'all'")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "Record CSV")->capture_default_str();
  bench_cmd->add_option("--summary", summary_out, "Summary table CSV");
  bench_cmd->add_option("--timelimit", bench_tl, "Seconds per record")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  std::string prof_in, prof_out = "profile.csv";
  auto* prof = app.add_subcommand("profile", "Performance profile from a record CSV");
  prof->add_option("--in", prof_in, "Record CSV")->required()->check(CLI::ExistingFile);
  prof->add_option("--out", prof_out, "Profile CSV")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen(family, gen_n, gen_count, gen_seed, gen_out);
    if (*solve) {
      sa.trace_set = trace_opt->count() > 0;
      return cmd_solve(sa);
    }
    if (*bench_cmd) return cmd_bench(suite_dir, configs, bench_out, bench_tl, threads, summary_out);
    if (*prof) return cmd_profile(prof_in, prof_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
