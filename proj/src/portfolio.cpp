#include "micqp/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace micqp::portfolio {

const char* to_string(Family f) {
  switch (f) {
    case Family::Classical: return "classical";
    case Family::Shortfall: return "shortfall";
    case Family::Robust: return "robust";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "classical") return Family::Classical;
  if (s == "shortfall") return Family::Shortfall;
  if (s == "robust") return Family::Robust;
  throw DomainError("unknown portfolio family '" + s + "'");
}

void PortfolioParams::validate() const {
  if (n < 2) throw DomainError("PortfolioParams: n must be >= 2");
  if (K_card < 1 || K_card >= n) throw DomainError("PortfolioParams: need 1 <= K_card < n");
  if (!(sigma > 0.0)) throw DomainError("PortfolioParams: sigma must be positive");
  if (abar.size() != n) throw DimensionError("PortfolioParams: abar must have length n");
  if (Qhalf.cols() != n || Qhalf.rows() < 1) throw DimensionError("PortfolioParams: Qhalf must have n columns");
  if (Rhalf.size() > 0 && Rhalf.cols() != n) throw DimensionError("PortfolioParams: Rhalf must have n columns");
  for (double e : eta)
    if (!(e > 0.5 && e < 1.0)) throw DomainError("PortfolioParams: eta must lie in (0.5, 1)");
  if (!(alpha >= 0.0)) throw DomainError("PortfolioParams: alpha must be nonnegative");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("inverse_normal_cdf: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step on Phi(x) - p
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

namespace {

// Budget, linking and cardinality rows over (x, z[, extra]).
MicqpInstance portfolio_skeleton(const PortfolioParams& p, int extra) {
  p.validate();
  const int n = p.n;
  const int N = 2 * n + extra;
  MicqpInstance inst = make_instance(N);
  inst.lb.head(2 * n).setZero();
  inst.ub.head(2 * n).setOnes();
  for (int j = 0; j < n; ++j) inst.int_vars.push_back(n + j);
  inst.E = Eigen::MatrixXd::Zero(n + 3, N);
  inst.h = Eigen::VectorXd::Zero(n + 3);
  inst.E.row(0).head(n).setOnes();
  inst.h[0] = 1.0;
  inst.E.row(1).head(n).setConstant(-1.0);
  inst.h[1] = -1.0;
  for (int j = 0; j < n; ++j) {
    inst.E(2 + j, j) = 1.0;
    inst.E(2 + j, n + j) = -1.0;
  }
  inst.E.row(n + 2).segment(n, n).setOnes();
  inst.h[n + 2] = p.K_card;
  inst.meta["family"] = to_string(p.family);
  inst.meta["n"] = std::to_string(n);
  inst.meta["K"] = std::to_string(p.K_card);
  inst.meta["seed"] = std::to_string(p.seed);
  return inst;
}

ConeBlock risk_cone(const Eigen::MatrixXd& F, double scale, int N, const Eigen::VectorXd& a, double b0) {
  const int n = static_cast<int>(F.cols());
  ConeBlock cb;
  cb.A = Eigen::MatrixXd::Zero(F.rows(), N);
  cb.A.leftCols(n) = scale * F;
  cb.b = Eigen::VectorXd::Zero(F.rows());
  cb.a = Eigen::VectorXd::Zero(N);
  cb.a.head(a.size()) = a;
  cb.b0 = b0;
  return cb;
}

}  // namespace

MicqpInstance gen_classical(const PortfolioParams& p) {
  auto inst = portfolio_skeleton(p, 0);
  inst.c.head(p.n) = p.abar;
  inst.cones.push_back(risk_cone(p.Qhalf, 1.0, inst.n, Eigen::VectorXd(), p.sigma));
  inst.meta["family"] = "classical";
  inst.validate();
  return inst;
}

MicqpInstance gen_shortfall(const PortfolioParams& p) {
  auto inst = portfolio_skeleton(p, 0);
  inst.c.head(p.n) = p.abar;
  for (int i = 0; i < 2; ++i)
    inst.cones.push_back(risk_cone(p.Qhalf, inverse_normal_cdf(p.eta[static_cast<std::size_t>(i)]), inst.n, p.abar,
                                   -p.W_low[static_cast<std::size_t>(i)]));
  inst.meta["family"] = "shortfall";
  inst.validate();
  return inst;
}

MicqpInstance gen_robust(const PortfolioParams& p) {
  auto inst = portfolio_skeleton(p, 1);
  const int t = 2 * p.n;
  inst.c[t] = 1.0;
  inst.cones.push_back(risk_cone(p.Qhalf, 1.0, inst.n, Eigen::VectorXd(), p.sigma));
  Eigen::VectorXd a = Eigen::VectorXd::Zero(inst.n);
  a.head(p.n) = p.abar;
  a[t] = -1.0;
  inst.cones.push_back(risk_cone(p.Rhalf.size() > 0 ? p.Rhalf : p.Qhalf, p.alpha, inst.n, a, 0.0));
  inst.meta["family"] = "robust";
  inst.validate();
  return inst;
}

MicqpInstance generate(const PortfolioParams& p) {
  switch (p.family) {
    case Family::Classical: return gen_classical(p);
    case Family::Shortfall: return gen_shortfall(p);
    case Family::Robust: return gen_robust(p);
  }
  throw DomainError("generate: unknown family");
}

MicqpInstance gen_fball(int n) {
  if (n < 2) throw DomainError("gen_fball: n must be >= 2");
  MicqpInstance inst = make_instance(n);
  inst.lb.setZero();
  inst.ub.setOnes();
  for (int j = 0; j < n; ++j) inst.int_vars.push_back(j);
  ConeBlock cb;
  cb.A = Eigen::MatrixXd::Identity(n, n);
  cb.b = Eigen::VectorXd::Constant(n, -0.5);
  cb.a = Eigen::VectorXd::Zero(n);
  cb.b0 = std::sqrt((n - 1) / 4.0);
  inst.cones.push_back(std::move(cb));
  inst.meta["family"] = "fball";
  inst.meta["n"] = std::to_string(n);
  inst.validate();
  return inst;
}

PortfolioParams random_params(Family family, int n, int index, std::uint64_t seed, const RandomScheme& s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(family), static_cast<std::uint32_t>(n),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> ret(s.abar_lo, s.abar_hi), u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  PortfolioParams p;
  p.n = n;
  p.family = family;
  p.K_card = std::min(s.K, n - 1);
  p.sigma = s.sigma;
  p.seed = seed;
  p.abar = Eigen::VectorXd::NullaryExpr(n, [&] { return ret(rng); });
  Eigen::MatrixXd F = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return gauss(rng); });
  const Eigen::VectorXd D = Eigen::VectorXd::NullaryExpr(n, [&] { return u01(rng); });
  p.Qhalf = 0.1 * F * D.asDiagonal();
  const double mean_norm = p.Qhalf.colwise().norm().mean();
  if (mean_norm > 0.0) p.Qhalf *= s.mean_vol / mean_norm;
  p.eta = s.eta;
  const double amin = p.abar.minCoeff();
  p.W_low = {s.wlow_factor[0] * amin, s.wlow_factor[1] * amin};
  p.alpha = s.alpha;
  return p;
}

std::vector<MicqpInstance> gen_random_suite(Family family, int n, int count, std::uint64_t seed,
                                            const RandomScheme& scheme) {
  std::vector<MicqpInstance> out;
  for (int i = 0; i < count; ++i) {
    auto inst = generate(random_params(family, n, i, seed, scheme));
    inst.meta["index"] = std::to_string(i);
    inst.meta["scheme"] = "abar~U[" + std::to_string(scheme.abar_lo) + "," + std::to_string(scheme.abar_hi) +
                          "]; Qhalf=F*diag(U[0,1]) scaled to mean column norm " + std::to_string(scheme.mean_vol) +
                          "; sigma=" + std::to_string(scheme.sigma);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace micqp::portfolio
