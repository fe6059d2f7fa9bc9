#ifndef LOGBO_STABLE_MATH_HPP
#define LOGBO_STABLE_MATH_HPP

#include <Eigen/Core>

namespace logbo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Precision-derived constants shared by the log-space special functions.
/// All thresholds are computed from the working epsilon at startup rather
/// than hard-coded, so they track the float width.
struct StableConstants {
  double c1;                 // log(2*pi)/2
  double c2;                 // log(pi/2)/2
  double eps;                // machine epsilon
  double softplus_branch_l;  // lower-branch threshold of logsoftplus, log(eps)
  double inv_sqrt_eps;       // 1/sqrt(eps)

  static const StableConstants& get();
};

/// Largest alpha for which the fat softplus stays strictly convex,
/// exp(-sqrt(1/3)) / (1 + exp(-sqrt(1/3)))^2 / 2, approximately 0.115135.
double fat_alpha_bound();

/// Lorentzian weight of the fat softplus. Defaults to 0.1, safely inside
/// the convexity bound.
struct FatAlpha {
  double alpha = 0.1;
  FatAlpha() = default;
  explicit FatAlpha(double a);  // throws std::domain_error outside [0, bound)
};

// ---- scalar special functions ----

/// log(1 - exp(x)) for x < 0, accurate on both sides of x = -log 2.
double log1mexp(double x);
double dlog1mexp(double x);

/// exp(x^2) erfc(x) without overflow for large positive x. Saturates to
/// +inf only where the true value exceeds the double range (x < -26.6).
double erfcx(double x);

/// log of the standard normal CDF; finite for any finite z in the
/// representable quadratic range.
double log_ndtr(double z);
double dlog_ndtr(double z);

/// log(erfc(x)): direct for x <= 0, erfcx-based for x > 0.
double logerfc(double x);
double dlogerfc(double x);

/// Stable softplus log(1 + exp(u)).
double softplus(double u);

/// log(softplus_tau(x)); the lower branch x/tau + log(tau) takes over
/// once the dropped second-order term falls below eps.
double logsoftplus(double x, double tau);
double dlogsoftplus(double x, double tau);

// ---- fat-tailed relaxations (polynomial decay toward -inf) ----

/// tau * (alpha/(1+u^2) + softplus(u)), u = x/tau. Smooth, positive,
/// monotone, convex upper bound of max(x, 0).
double fatplus(double x, double tau, const FatAlpha& alpha = FatAlpha());
double dfatplus(double x, double tau, const FatAlpha& alpha = FatAlpha());
double log_fatplus(double x, double tau, const FatAlpha& alpha = FatAlpha());
double dlog_fatplus(double x, double tau, const FatAlpha& alpha = FatAlpha());

/// Smooth maximum max_j v_j + tau * log sum_i [1 + ((v_i - max)/tau)^2]^-1.
/// Satisfies max <= fatmax <= max + tau log d; every input receives a
/// polynomially decaying gradient.
double fatmax(const Vec& v, double tau);
Vec fatmax_grad(const Vec& v, double tau);
double fatmin(const Vec& v, double tau);
Vec fatmin_grad(const Vec& v, double tau);

/// Two-branch Lorentzian sigmoid with gamma = sqrt(1/3): iota(0) = 1/2,
/// monotone, O(u^-2) left tail. Temperature enters as iota(x/tau).
double fatsigmoid(double x, double tau);
double dfatsigmoid(double x, double tau);
double log_fatsigmoid(double x, double tau);
double dlog_fatsigmoid(double x, double tau);

/// log(exp(a) - exp(b)) for a > b.
double logdiffexp(double a, double b);
/// Partial derivatives (d/da, d/db) of logdiffexp.
void dlogdiffexp(double a, double b, double& da, double& db);

// ---- reductions ----

/// Max-shifted log sum of exponentials. Throws on empty input.
double logsumexp(const Vec& v);
/// Weighted variant: log sum_i w_i exp(v_i) with log-weights.
double logsumexp_weighted(const Vec& v, const Vec& log_w);
/// Gradient of logsumexp, i.e. softmax(v).
Vec logsumexp_grad(const Vec& v);

}  // namespace logbo

#endif  // LOGBO_STABLE_MATH_HPP
