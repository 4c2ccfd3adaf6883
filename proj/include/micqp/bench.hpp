#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "micqp/bnb.hpp"
#include "micqp/model.hpp"

namespace micqp::bench {

/// A solver configuration: algorithm, instance reformulation and static quality.
///
/// algorithm: "oa"             outer approximation over flat rows
///            "lifted-branch"  static rows, branch-based refinement
///            "lifted-cut"     static rows plus separable cuts
///            "flat-cut"       flat rows only, cut-based refinement
/// reform:    "none", "sep", "tower", "towersep" or "persp"
struct Config {
  std::string id;
  std::string algorithm = "lifted-cut";
  std::string reform = "none";
  double eps = 0.01;
};

/// OA, LiftedLP-branch, LiftedLP-cut, SepLP, TowerLP, TowerSepLP.
const std::vector<Config>& standard_configs();
/// Looks `id` up among the standard configurations; DomainError if absent.
const Config& find_config(const std::string& id);
/// Parses a comma-separated list of ids, or "all".
std::vector<Config> parse_config_list(const std::string& list);

/// Solves `inst` with `cfg`.  Reformulated runs are mapped back to the
/// original variables and repaired with the integers fixed; the result
/// always refers to the original instance.
bnb::SolveResult solve_config(const MicqpInstance& inst, const Config& cfg, const bnb::Options& opts = {});

struct RunRecord {
  std::string instance;
  std::string config;
  SolveStatus status = SolveStatus::IterLimit;
  double time_s = 0.0;
  long nodes = 0;
  long cuts = 0;
  long lp_solves = 0;
  long conic_solves = 0;
  double objective = -kInf;  // in the instance's own sense
  double max_violation = -kInf;

  bool solved() const { return status == SolveStatus::Optimal || status == SolveStatus::Infeasible; }
  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct NamedInstance {
  std::string id;
  MicqpInstance inst;
};

/// Every *.json file of `dir` in file-name order, id = file stem.
std::vector<NamedInstance> load_suite(const std::filesystem::path& dir);

/// One record per (instance, config), ordered instance-major.  Records are
/// distributed over `threads` workers; a failing solve is recorded as
/// IterLimit and never aborts the suite.
std::vector<RunRecord> run_suite(const std::vector<NamedInstance>& instances, const std::vector<Config>& configs,
                                 double time_limit, int threads = 1);
/// Same results computed by a plain loop.
std::vector<RunRecord> run_suite_serial(const std::vector<NamedInstance>& instances, const std::vector<Config>& configs,
                                        double time_limit);

struct SummaryRow {
  std::string config;
  int records = 0;
  int solved = 0;
  double min = 0.0, avg = 0.0, max = 0.0, std = 0.0;  // wall time over all records
  int wins = 0;   // instances where this config is fastest among solved records
  int win1 = 0;   // instances solved within 1.01 times the fastest
  int win10 = 0;  // within 1.10 times the fastest
};

/// Rows follow the standard configuration order, then other ids sorted.
/// Equal fastest times go to the earliest config in that order.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

struct ProfileCurve {
  std::string config;
  std::vector<std::pair<double, double>> points;  // (tau, rho(tau)), tau ascending from 1
};

/// Ratio-to-best curves; unsolved records have ratio infinity.
std::vector<ProfileCurve> profile(const std::vector<RunRecord>& records);
/// rho(tau) of a curve (step function, right-continuous).
double profile_value(const ProfileCurve& curve, double tau);

/// Header: instance,config,status,time_s,nodes,cuts,lp_solves,conic_solves,objective,max_violation
void write_csv(std::ostream& os, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_csv(std::istream& is);
void write_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_csv(const std::filesystem::path& path);

void write_profile_csv(std::ostream& os, const std::vector<ProfileCurve>& curves);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

}  // namespace micqp::bench
