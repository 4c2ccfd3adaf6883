#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "micqp/model.hpp"

namespace micqp::portfolio {

enum class Family { Classical, Shortfall, Robust };

const char* to_string(Family f);
Family family_from_string(const std::string& s);

struct PortfolioParams {
  int n = 0;
  int K_card = 0;
  double sigma = 0.2;
  Eigen::VectorXd abar;
  Eigen::MatrixXd Qhalf;  // risk of x is ||Qhalf x||
  Family family = Family::Classical;
  std::array<double, 2> eta{0.95, 0.97};
  std::array<double, 2> W_low{0.0, 0.0};
  double alpha = 1.0;
  Eigen::MatrixXd Rhalf;  // empty means Qhalf
  std::uint64_t seed = 0;

  /// Throws DomainError / DimensionError.
  void validate() const;
};

/// Standard normal distribution function.
double normal_cdf(double x);
/// Its inverse on (0, 1); DomainError outside.
double inverse_normal_cdf(double p);

/// max abar.x  s.t.  ||Qhalf x|| <= sigma, sum x = 1, x <= z, sum z <= K,
/// x >= 0, z binary.  Variables are x_1..x_n then z_1..z_n.  The budget
/// equality is stored as two opposite rows.
MicqpInstance gen_classical(const PortfolioParams& p);

/// The classical rows with the risk cone replaced by
/// Phi^-1(eta_i) ||Qhalf x|| <= abar.x - W_low_i for i = 1, 2.
MicqpInstance gen_shortfall(const PortfolioParams& p);

/// The classical instance with an extra variable t (last), objective t and
/// alpha ||Rhalf x|| <= abar.x - t.
MicqpInstance gen_robust(const PortfolioParams& p);

/// Dispatch on p.family.
MicqpInstance generate(const PortfolioParams& p);

/// Binary x with ||x - 1/2|| <= sqrt((n - 1) / 4) and zero objective.  It has
/// no integer point while the center is feasible for the relaxation.
MicqpInstance gen_fball(int n);

/// Settings of the random parameter scheme.
struct RandomScheme {
  double abar_lo = 0.9, abar_hi = 1.3;
  double mean_vol = 0.2;  // average column norm of Qhalf
  double sigma = 0.2;
  std::array<double, 2> eta{0.95, 0.97};
  std::array<double, 2> wlow_factor{0.9, 0.7};  // times min abar
  double alpha = 1.0;
  int K = 10;  // capped at n - 1
};

/// Parameters of instance `index` of a suite; depends only on the arguments.
PortfolioParams random_params(Family family, int n, int index, std::uint64_t seed, const RandomScheme& scheme = {});

std::vector<MicqpInstance> gen_random_suite(Family family, int n, int count, std::uint64_t seed,
                                            const RandomScheme& scheme = {});

}  // namespace micqp::portfolio
