#include "micqp/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <omp.h>

#include "micqp/conic.hpp"
#include "micqp/reform.hpp"

namespace micqp::bench {

const std::vector<Config>& standard_configs() {
  static const std::vector<Config> configs = {
      {"OA", "oa", "none", 0.01},
      {"LiftedLP-branch", "lifted-branch", "none", 0.01},
      {"LiftedLP-cut", "lifted-cut", "none", 0.01},
      {"SepLP", "flat-cut", "sep", 0.01},
      {"TowerLP", "flat-cut", "tower", 0.01},
      {"TowerSepLP", "flat-cut", "towersep", 0.01},
  };
  return configs;
}

const Config& find_config(const std::string& id) {
  for (const auto& c : standard_configs())
    if (c.id == id) return c;
  throw DomainError("unknown configuration '" + id + "'");
}

std::vector<Config> parse_config_list(const std::string& list) {
  if (list == "all") return standard_configs();
  std::vector<Config> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(find_config(item));
  if (out.empty()) throw DomainError("empty configuration list");
  return out;
}

namespace {

bnb::SolveResult run_algorithm(const MicqpInstance& inst, const Config& cfg, const bnb::Options& opts) {
  if (cfg.algorithm == "oa") return bnb::solve_oa(inst, opts);
  bnb::LiftedConfig lc;
  lc.eps = cfg.eps;
  if (cfg.algorithm == "lifted-branch") {
    lc.strategy = bnb::RefineStrategy::BranchBased;
  } else if (cfg.algorithm == "lifted-cut") {
    lc.strategy = bnb::RefineStrategy::CutBased;
  } else if (cfg.algorithm == "flat-cut") {
    lc.strategy = bnb::RefineStrategy::CutBased;
    lc.use_static = false;
    lc.dynamic = bnb::DynamicKind::Flat;
  } else {
    throw DomainError("unknown algorithm '" + cfg.algorithm + "'");
  }
  return bnb::solve_lifted(inst, lc, opts);
}

}  // namespace

bnb::SolveResult solve_config(const MicqpInstance& inst, const Config& cfg, const bnb::Options& opts) {
  if (cfg.reform == "none") return run_algorithm(inst, cfg, opts);
  const auto start = std::chrono::steady_clock::now();
  const auto rf = reform::reformulate(inst, cfg.reform);
  bnb::SolveResult res = run_algorithm(rf.inst, cfg, opts);
  if (res.has_incumbent()) {
    Eigen::VectorXd x = rf.back_map(res.x);
    Eigen::VectorXd l = inst.lb, u = inst.ub;
    for (int j : inst.int_vars) l[j] = u[j] = std::round(x[j]);
    const auto fixed = solve_conic(inst, l, u, opts.conic);
    ++res.stats.conic_solves;
    if (fixed.status == ConicStatus::Optimal) {
      x = fixed.x;
      res.objective = fixed.obj;
    } else {
      res.objective = inst.c.dot(x);
    }
    res.x = x;
    res.max_violation = max_cone_violation(inst, x);
  }
  res.stats.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

std::vector<NamedInstance> load_suite(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("load_suite: not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<NamedInstance> out;
  for (const auto& f : files) out.push_back({f.stem().string(), read_instance(f)});
  return out;
}

namespace {

RunRecord run_one(const NamedInstance& ni, const Config& cfg, double time_limit) {
  RunRecord rec;
  rec.instance = ni.id;
  rec.config = cfg.id;
  const MicqpInstance inst = ni.inst;
  bnb::Options opts;
  opts.limits.time_limit = time_limit;
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto r = solve_config(inst, cfg, opts);
    rec.status = r.status;
    rec.nodes = r.stats.nodes;
    rec.cuts = r.stats.cuts;
    rec.lp_solves = r.stats.lp_solves;
    rec.conic_solves = r.stats.conic_solves;
    rec.objective = r.has_incumbent() ? inst.reported_objective(r.objective) : inst.reported_objective(-kInf);
    rec.max_violation = r.max_violation;
  } catch (const std::exception& e) {
    rec.status = SolveStatus::IterLimit;
#pragma omp critical(bench_log)
    std::cerr << "run_suite: " << ni.id << " / " << cfg.id << ": " << e.what() << '\n';
  }
  rec.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace

std::vector<RunRecord> run_suite(const std::vector<NamedInstance>& instances, const std::vector<Config>& configs,
                                 double time_limit, int threads) {
  const long total = static_cast<long>(instances.size() * configs.size());
  std::vector<RunRecord> out(static_cast<std::size_t>(total));
  const long nc = static_cast<long>(configs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, threads))
  for (long k = 0; k < total; ++k)
    out[static_cast<std::size_t>(k)] =
        run_one(instances[static_cast<std::size_t>(k / nc)], configs[static_cast<std::size_t>(k % nc)], time_limit);
  return out;
}

std::vector<RunRecord> run_suite_serial(const std::vector<NamedInstance>& instances, const std::vector<Config>& configs,
                                        double time_limit) {
  std::vector<RunRecord> out;
  for (const auto& ni : instances)
    for (const auto& cfg : configs) out.push_back(run_one(ni, cfg, time_limit));
  return out;
}

namespace {

std::vector<std::string> config_order(const std::vector<RunRecord>& records) {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.config);
  std::vector<std::string> out;
  for (const auto& c : standard_configs())
    if (ids.erase(c.id)) out.push_back(c.id);
  out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

// instance -> config -> time (infinity when unsolved)
std::map<std::string, std::map<std::string, double>> solve_times(const std::vector<RunRecord>& records) {
  std::map<std::string, std::map<std::string, double>> t;
  for (const auto& r : records) {
    const double v = r.solved() ? r.time_s : kInf;
    auto [it, fresh] = t[r.instance].emplace(r.config, v);
    if (!fresh) it->second = std::min(it->second, v);
  }
  return t;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  const auto order = config_order(records);
  std::map<std::string, SummaryRow> rows;
  std::map<std::string, std::vector<double>> times;
  for (const auto& r : records) {
    auto& row = rows[r.config];
    row.config = r.config;
    ++row.records;
    if (r.solved()) ++row.solved;
    times[r.config].push_back(r.time_s);
  }
  for (auto& [id, row] : rows) {
    auto v = times[id];
    std::sort(v.begin(), v.end());
    row.min = v.front();
    row.max = v.back();
    double sum = 0.0;
    for (double x : v) sum += x;
    row.avg = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - row.avg) * (x - row.avg);
    row.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  }
  for (const auto& [inst, per] : solve_times(records)) {
    double best = kInf;
    std::string winner;
    for (const auto& id : order) {
      auto it = per.find(id);
      if (it != per.end() && it->second < best) {
        best = it->second;
        winner = id;
      }
    }
    if (!std::isfinite(best)) continue;
    ++rows[winner].wins;
    for (const auto& [id, t] : per) {
      if (t <= 1.01 * best) ++rows[id].win1;
      if (t <= 1.10 * best) ++rows[id].win10;
    }
  }
  std::vector<SummaryRow> out;
  for (const auto& id : order) out.push_back(rows[id]);
  return out;
}

std::vector<ProfileCurve> profile(const std::vector<RunRecord>& records) {
  const auto order = config_order(records);
  const auto t = solve_times(records);
  const double count = static_cast<double>(t.size());
  std::vector<ProfileCurve> out;
  for (const auto& id : order) {
    std::vector<double> ratios;
    for (const auto& [inst, per] : t) {
      double best = kInf;
      for (const auto& [cid, v] : per) best = std::min(best, v);
      auto it = per.find(id);
      if (it == per.end() || !std::isfinite(it->second)) continue;
      const double floor = 1e-9;
      ratios.push_back(std::max(it->second, floor) / std::max(best, floor));
    }
    std::sort(ratios.begin(), ratios.end());
    ProfileCurve c;
    c.config = id;
    c.points.emplace_back(1.0, 0.0);
    for (std::size_t k = 0; k < ratios.size(); ++k) {
      const double tau = std::max(1.0, ratios[k]);
      const double rho = static_cast<double>(k + 1) / count;
      if (c.points.back().first == tau) c.points.back().second = rho;
      else c.points.emplace_back(tau, rho);
    }
    out.push_back(std::move(c));
  }
  return out;
}

double profile_value(const ProfileCurve& curve, double tau) {
  double rho = 0.0;
  for (const auto& [t, r] : curve.points)
    if (t <= tau) rho = r;
  return rho;
}

namespace {

const char* kHeader = "instance,config,status,time_s,nodes,cuts,lp_solves,conic_solves,objective,max_violation";

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      f.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw ParseError("read_csv: unterminated quote");
  f.push_back(cur);
  return f;
}

double parse_double(const std::string& s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("read_csv: bad number '" + s + "'");
  return v;
}

long parse_long(const std::string& s) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("read_csv: bad integer '" + s + "'");
  return v;
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << kHeader << '\n';
  for (const auto& r : records)
    os << quote(r.instance) << ',' << quote(r.config) << ',' << to_string(r.status) << ',' << fmt(r.time_s) << ','
       << r.nodes << ',' << r.cuts << ',' << r.lp_solves << ',' << r.conic_solves << ',' << fmt(r.objective) << ','
       << fmt(r.max_violation) << '\n';
}

std::vector<RunRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("read_csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw ParseError("read_csv: unexpected header '" + line + "'");
  std::vector<RunRecord> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw ParseError("read_csv: expected 10 fields in '" + line + "'");
    RunRecord r;
    r.instance = f[0];
    r.config = f[1];
    r.status = status_from_string(f[2]);
    r.time_s = parse_double(f[3]);
    r.nodes = parse_long(f[4]);
    r.cuts = parse_long(f[5]);
    r.lp_solves = parse_long(f[6]);
    r.conic_solves = parse_long(f[7]);
    r.objective = parse_double(f[8]);
    r.max_violation = parse_double(f[9]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  write_csv(os, records);
}

std::vector<RunRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  return read_csv(is);
}

void write_profile_csv(std::ostream& os, const std::vector<ProfileCurve>& curves) {
  os << "config,tau,rho\n";
  for (const auto& c : curves)
    for (const auto& [tau, rho] : c.points) os << quote(c.config) << ',' << fmt(tau) << ',' << fmt(rho) << '\n';
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "config,records,solved,min,avg,max,std,wins,win1,win10\n";
  for (const auto& r : rows)
    os << quote(r.config) << ',' << r.records << ',' << r.solved << ',' << fmt(r.min) << ',' << fmt(r.avg) << ','
       << fmt(r.max) << ',' << fmt(r.std) << ',' << r.wins << ',' << r.win1 << ',' << r.win10 << '\n';
}

}  // namespace micqp::bench
