#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "micqp/lp.hpp"

namespace micqp::relax {

using lp::LpModel;

/// Default violation tolerance of the separation oracles.
inline constexpr double kSeparationTol = 1e-7;

/// Columns of one cone ||y|| <= y0 inside a host LP, plus any auxiliary columns.
struct ConeVarMap {
  int y0_col = -1;
  std::vector<int> y_cols;
  std::vector<int> aux_cols;

  int dim() const { return static_cast<int>(y_cols.size()); }
};

/// Append free columns y0, y_1..y_d to `model`.
ConeVarMap add_cone_columns(LpModel& model, int d);

struct TowerShape {
  int d = 0;
  int K = 0;
  std::vector<int> r;  // r[0] = d, ..., r[K] = 1
  int R = 0;           // sum of r
  // (i, k) with i 1-based, one entry per three-dimensional gadget
  std::vector<std::pair<int, int>> gadgets;
};

TowerShape tower_shape(int d);

/// Unit directions for O^d(Omega) rows.
class OmegaPool {
 public:
  explicit OmegaPool(int dim = 2) : dim_(dim) {}

  /// Normalizes `omega`; returns false when it duplicates a stored direction.
  bool add(const Eigen::VectorXd& omega);
  bool contains(const Eigen::VectorXd& unit) const;

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(dirs_.size()); }
  const std::vector<Eigen::VectorXd>& directions() const { return dirs_; }

  /// +-e_j for every coordinate.
  static OmegaPool axes(int dim);
  /// The four directions (+-1, +-1)/sqrt(2).
  static OmegaPool diagonals2();

 private:
  int dim_;
  std::vector<Eigen::VectorXd> dirs_;
};

/// Per-coordinate tangent points for the separable relaxation.
class GammaPool {
 public:
  explicit GammaPool(int d = 0) : points_(static_cast<std::size_t>(d)) {}

  /// Returns false when gamma is already present (within 1e-12).
  bool add(int j, double gamma);
  bool contains(int j, double gamma) const;

  int dim() const { return static_cast<int>(points_.size()); }
  const std::vector<double>& at(int j) const { return points_.at(static_cast<std::size_t>(j)); }
  int total() const;

  /// The same set for every coordinate.
  static GammaPool uniform(int d, const std::vector<double>& gammas);

 private:
  std::vector<std::vector<double>> points_;  // sorted
};

// ---------------------------------------------------------------------------
// Flat outer approximation O^d(Omega)

/// One row  omega . y - y0 <= 0  per direction.
std::vector<int> attach_flat_oa(LpModel& model, const ConeVarMap& map, const OmegaPool& pool);
int add_flat_row(LpModel& model, const ConeVarMap& map, const Eigen::VectorXd& omega);

struct FlatCut {
  Eigen::VectorXd omega;
  double violation = 0.0;  // omega . y - y0 at the separated point
};

/// Directions whose rows cut (y0, y) off.  Empty when ||y|| <= y0 + tol.
/// At y = 0 with y0 < -tol every direction cuts; +-e_j are returned.
std::vector<FlatCut> separate_flat(double y0, const Eigen::VectorXd& y,
                                   double tol = kSeparationTol);

// ---------------------------------------------------------------------------
// Rotation gadget for L^2

struct NtwoBlock {
  int s = 0;
  std::vector<int> v_cols;  // 2s
  std::vector<int> eq_rows;    // s+1
  std::vector<int> ineq_rows;  // 2s
};

NtwoBlock attach_ntwo(LpModel& model, int y0_col, int y1_col, int y2_col, int s);

/// Values of v for a point with sqrt(y1^2 + y2^2) <= y0 that satisfy the gadget.
std::vector<double> ntwo_lift(double y0, double y1, double y2, int s);

/// 1/cos(pi/2^s) - 1
double ntwo_quality(int s);

/// s_k(eps) for one level, clamped to >= 1.  eps must lie in (0, 1/2).
int ntwo_depth(int k, double eps);
/// s_k(eps) for k = 0..K-1 of tower_shape(d).
std::vector<int> ntwo_depth_schedule(int d, double eps);

// ---------------------------------------------------------------------------
// Tower of variables

enum class LeafKind { Exact, Dynamic, SepH2 };

struct TowerLeaf {
  LeafKind kind = LeafKind::Dynamic;
  std::vector<int> s_per_level;  // Exact; a single entry is used for every level
  OmegaPool omega{2};            // Dynamic: initial pool of every gadget
  std::vector<double> gammas;    // SepH2: initial tangent points of both coordinates

  static TowerLeaf exact(int s);
  static TowerLeaf exact_schedule(std::vector<int> s_per_level);
  static TowerLeaf dynamic(OmegaPool initial);
  static TowerLeaf sep(std::vector<double> gammas);
};

struct Gadget {
  int level = 0;
  int index = 0;  // 1-based within the level
  int out_col = -1, in1_col = -1, in2_col = -1;
  NtwoBlock ntwo;            // Exact
  OmegaPool omega{2};        // Dynamic
  GammaPool gamma{2};        // SepH2
  int w1_col = -1, w2_col = -1;
  std::vector<int> rows;
};

struct TowerBlock {
  ConeVarMap map;
  TowerShape shape;
  LeafKind kind = LeafKind::Dynamic;
  std::vector<int> t_cols;  // intermediate tower columns (d - 2 of them)
  std::vector<Gadget> gadgets;

  int num_aux_cols() const;   // t columns plus leaf columns
  int num_rows() const;       // all rows
  int num_eq_rows() const;    // equality rows
  int num_ineq_rows() const;  // inequality rows
};

TowerBlock attach_tower(LpModel& model, const ConeVarMap& map, const TowerLeaf& leaf);

/// Static relaxation L^d_eps (rotation-gadget leaves with the s_k(eps) schedule).
TowerBlock attach_lifted_eps(LpModel& model, const ConeVarMap& map, double eps);

/// Separate every gadget of a Dynamic or SepH2 tower at column values `x`.
/// Returns the number of rows added.
int refine_tower(LpModel& model, TowerBlock& block, const Eigen::VectorXd& x,
                 double tol = kSeparationTol);

/// Fill the tower and leaf columns of `x` for the point (x[y0], x[y]) in L^d.
void lift_tower(const TowerBlock& block, Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Separable relaxation H^d(Gamma)

struct SepBlock {
  ConeVarMap map;  // aux_cols = w
  GammaPool pool;
  int budget_row = -1;
  int sign_row = -1;
  std::vector<int> tangent_rows;

  int num_rows() const { return 2 + static_cast<int>(tangent_rows.size()); }
};

/// Adds w columns, sum w <= y0, y0 >= 0 and one tangent row per pool entry.
SepBlock attach_sep(LpModel& model, const ConeVarMap& map, const GammaPool& pool);

/// Adds the tangent 2 gamma y_j - gamma^2 y0 <= w_j unless already present.
/// Returns the row index or -1.
int add_sep_cut(LpModel& model, SepBlock& block, int j, double gamma);

struct GammaCut {
  int j = 0;
  double gamma = 0.0;
};

/// Tangent points cutting off (y0, y, w).  At |y0| <= tol with a violated
/// point every coordinate receives +-1.
std::vector<GammaCut> separate_sep(double y0, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& w, double tol = kSeparationTol);

/// w_j = y_j^2 / y0 (0 at the apex).
void lift_sep(const SepBlock& block, Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Perspective cuts

/// c0 * y0 + cy * y_j <= w_j
struct PerspectiveRow {
  double c0 = 0.0;
  double cy = 0.0;
};

PerspectiveRow perspective_cut(const std::function<double(double)>& f,
                               const std::function<double(double)>& fprime, double gamma);

// ---------------------------------------------------------------------------
// Quality measurement

/// Largest LP value of u . y over the block rows with y0 = 1, minus one,
/// over `num_dirs` random unit directions plus +-e_j (and, for d = 2, 1024
/// equally spaced angles).
double measure_quality(const LpModel& model, const ConeVarMap& map, int num_dirs,
                       std::uint64_t seed);
/// Same computation on one thread; kept as the reference.
double measure_quality_serial(const LpModel& model, const ConeVarMap& map, int num_dirs,
                              std::uint64_t seed);

/// The direction set used by measure_quality.
std::vector<Eigen::VectorXd> quality_directions(int d, int num_dirs, std::uint64_t seed);

}  // namespace micqp::relax
