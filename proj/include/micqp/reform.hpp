#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "micqp/model.hpp"

namespace micqp::reform {

/// An extended instance whose first `n_orig` variables are the original ones.
/// Every other variable is auxiliary, so projecting onto the leading block
/// recovers an original point with the same objective.
struct ReformulatedInstance {
  MicqpInstance inst;
  int n_orig = 0;
  std::string kind;

  Eigen::VectorXd back_map(const Eigen::VectorXd& x_ext) const;
  /// n_orig x inst.n selection matrix of back_map.
  Eigen::MatrixXd back_map_matrix() const;
};

/// Each cone with d >= 3 becomes d - 1 cones of dimension two over a binary
/// tree of d - 2 new variables.  Smaller cones are copied.
ReformulatedInstance reform_tower(const MicqpInstance& inst);

/// Per cone: w_1..w_d >= 0, sum w <= y0, y0 >= 0, and y_j^2 <= w_j y0 stored
/// as ||(2 y_j, w_j - y0)|| <= w_j + y0.
ReformulatedInstance reform_sep(const MicqpInstance& inst);

/// Tower skeleton whose three-dimensional pieces (t; a, b) are replaced by
/// a^2 <= v1 t, b^2 <= v2 t, v1 + v2 <= t.
ReformulatedInstance reform_towersep(const MicqpInstance& inst);

/// Classical portfolio instance with identity risk factor (meta family
/// "classical", variables x then z, one cone ||x|| <= sigma): replaces the
/// cone by x_j^2 <= w_j z_j and sum w <= sigma^2.  Throws NotApplicable for
/// any other structure.
ReformulatedInstance strengthen_perspective(const MicqpInstance& inst);

/// "none", "sep", "tower", "towersep" or "persp".
ReformulatedInstance reformulate(const MicqpInstance& inst, std::string_view kind);

}  // namespace micqp::reform
