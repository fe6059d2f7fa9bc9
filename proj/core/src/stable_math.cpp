#include "logbo/stable_math.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace logbo {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kSqrtPi = 1.7724538509055160;
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInf = std::numeric_limits<double>::infinity();

// erfcx on [0, inf): direct product below 12, asymptotic series above.
// The series 1/(x sqrt(pi)) * sum_k (-1)^k (2k-1)!!/(2x^2)^k has remainder
// bounded by its first omitted term, which is below eps for x >= 12.
double erfcx_pos(double x) {
  if (x < 12.0) return std::exp(x * x) * std::erfc(x);
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 40; ++k) {
    term *= -(2 * k - 1) * inv2x2;
    const double prev = sum;
    sum += term;
    if (sum == prev) break;
  }
  return sum / (x * kSqrtPi);
}

double sq(double t) { return t * t; }

// log(1 + t^2) with overflow guard for |t| beyond sqrt(DBL_MAX).
double log1p_sq(double t) {
  const double a = std::abs(t);
  if (a < 1e150) return std::log1p(t * t);
  return 2.0 * std::log(a);
}

const double kFatSigmoidGamma = std::sqrt(1.0 / 3.0);

}  // namespace

const StableConstants& StableConstants::get() {
  static const StableConstants c = [] {
    StableConstants s;
    s.eps = std::numeric_limits<double>::epsilon();
    s.c1 = 0.5 * std::log(2.0 * M_PI);
    s.c2 = 0.5 * std::log(M_PI / 2.0);
    // below log(eps) the dropped O(e^{2u}) term of logsoftplus is < eps
    s.softplus_branch_l = std::log(s.eps);
    s.inv_sqrt_eps = 1.0 / std::sqrt(s.eps);
    return s;
  }();
  return c;
}

double fat_alpha_bound() {
  static const double b = [] {
    const double e = std::exp(-std::sqrt(1.0 / 3.0));
    return e / sq(1.0 + e) / 2.0;
  }();
  return b;
}

FatAlpha::FatAlpha(double a) : alpha(a) {
  if (!(a >= 0.0) || a >= fat_alpha_bound())
    throw std::domain_error("FatAlpha: alpha outside [0, convexity bound)");
}

double log1mexp(double x) {
  if (!(x < 0.0)) throw std::domain_error("log1mexp: requires x < 0");
  if (x > -kLn2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

double dlog1mexp(double x) {
  if (!(x < 0.0)) throw std::domain_error("dlog1mexp: requires x < 0");
  // -e^x / (1 - e^x)
  return std::exp(x) / std::expm1(x);
}

double erfcx(double x) {
  if (x >= 0.0) return erfcx_pos(x);
  const double xx = x * x;
  if (xx > 709.0) return kInf;  // 2 e^{x^2} overflows; true value does too
  return 2.0 * std::exp(xx) - erfcx_pos(-x);
}

double log_ndtr(double z) {
  if (z >= 0.0) return std::log1p(-0.5 * std::erfc(z / kSqrt2));
  if (z > -1.0) return std::log(0.5 * std::erfc(-z / kSqrt2));
  return logerfc(-z / kSqrt2) - kLn2;
}

double dlog_ndtr(double z) {
  // phi(z) / Phi(z), computed in log space so the tail stays finite
  const auto& c = StableConstants::get();
  return std::exp(-0.5 * z * z - c.c1 - log_ndtr(z));
}

double logerfc(double x) {
  // near zero, erfc(x) = 1 - erf(x) loses the tiny part to rounding;
  // log1p on erf keeps full relative accuracy
  if (std::abs(x) < 0.5) return std::log1p(-std::erf(x));
  if (x <= 0.0) return std::log(std::erfc(x));
  return std::log(erfcx(x)) - x * x;
}

double dlogerfc(double x) {
  // erfc'(x)/erfc(x) = -2 / (sqrt(pi) erfcx(x))
  return -2.0 / (kSqrtPi * erfcx(x));
}

double softplus(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

double logsoftplus(double x, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("logsoftplus: requires tau > 0");
  const double u = x / tau;
  const auto& c = StableConstants::get();
  if (u > c.softplus_branch_l) return std::log(tau) + std::log(softplus(u));
  return u + std::log(tau);
}

double dlogsoftplus(double x, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("dlogsoftplus: requires tau > 0");
  const double u = x / tau;
  const auto& c = StableConstants::get();
  if (u <= c.softplus_branch_l) return 1.0 / tau;
  const double sig = (u > 0.0) ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u - softplus(u));
  return sig / (tau * softplus(u));
}

double fatplus(double x, double tau, const FatAlpha& alpha) {
  if (!(tau > 0.0)) throw std::domain_error("fatplus: requires tau > 0");
  const double u = x / tau;
  const double lorentz = (std::abs(u) < 1e150) ? alpha.alpha / (1.0 + u * u) : 0.0;
  return tau * (lorentz + softplus(u));
}

double dfatplus(double x, double tau, const FatAlpha& alpha) {
  if (!(tau > 0.0)) throw std::domain_error("dfatplus: requires tau > 0");
  const double u = x / tau;
  const double sig = (u > 0.0) ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u - softplus(u));
  double lor = 0.0;
  if (std::abs(u) < 1e75) {
    lor = -2.0 * alpha.alpha * u / sq(1.0 + u * u);
  } else if (u < 0.0) {
    lor = 2.0 * alpha.alpha / (std::abs(u) * u * u);
  }
  return sig + lor;
}

double log_fatplus(double x, double tau, const FatAlpha& alpha) {
  if (!(tau > 0.0)) throw std::domain_error("log_fatplus: requires tau > 0");
  const double u = x / tau;
  const double sp = softplus(u);
  const double lb = (sp > 0.0) ? std::log(sp) : u;  // sp underflows only for u < -745
  if (alpha.alpha == 0.0) return std::log(tau) + lb;
  const double la = std::log(alpha.alpha) - log1p_sq(u);
  const double m = std::max(la, lb);
  return std::log(tau) + m + std::log1p(std::exp(std::min(la, lb) - m));
}

double dlog_fatplus(double x, double tau, const FatAlpha& alpha) {
  if (!(tau > 0.0)) throw std::domain_error("dlog_fatplus: requires tau > 0");
  const double u = x / tau;
  // log phi_+'(u), both summands positive for u < 0
  double lnum;
  if (u >= 0.0) {
    const double d = dfatplus(x, tau, alpha);
    lnum = std::log(d);
  } else {
    const double lsig = u - softplus(u);  // log sigmoid(u)
    if (alpha.alpha == 0.0) {
      lnum = lsig;
    } else {
      const double llor = std::log(2.0 * alpha.alpha * std::abs(u)) - 2.0 * log1p_sq(u);
      const double m = std::max(lsig, llor);
      lnum = m + std::log1p(std::exp(std::min(lsig, llor) - m));
    }
  }
  const double lphi = log_fatplus(x, tau, alpha) - std::log(tau);
  return std::exp(lnum - lphi) / tau;
}

double fatmax(const Vec& v, double tau) {
  if (v.size() == 0) throw std::domain_error("fatmax: empty input");
  if (!(tau > 0.0)) throw std::domain_error("fatmax: requires tau > 0");
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += 1.0 / (1.0 + sq((v[i] - m) / tau));
  return m + tau * std::log(s);
}

Vec fatmax_grad(const Vec& v, double tau) {
  if (v.size() == 0) throw std::domain_error("fatmax_grad: empty input");
  if (!(tau > 0.0)) throw std::domain_error("fatmax_grad: requires tau > 0");
  Eigen::Index jmax = 0;
  v.maxCoeff(&jmax);
  const double m = v[jmax];
  double s = 0.0;
  Vec g(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double w = (v[i] - m) / tau;
    g[i] = 1.0 / (1.0 + w * w);
    s += g[i];
  }
  Vec grad(v.size());
  double others = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double w = (v[i] - m) / tau;
    grad[i] = -2.0 * w * sq(g[i]) / s;
    if (i != jmax) others += grad[i];
  }
  grad[jmax] = 1.0 - others;  // total mass 1, like softmax
  return grad;
}

double fatmin(const Vec& v, double tau) { return -fatmax(-v, tau); }

Vec fatmin_grad(const Vec& v, double tau) { return fatmax_grad(-v, tau); }

double fatsigmoid(double x, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("fatsigmoid: requires tau > 0");
  const double u = x / tau;
  const double g = kFatSigmoidGamma;
  if (u < 0.0) return (2.0 / 3.0) / (1.0 + sq(u - g));
  return 1.0 - (2.0 / 3.0) / (1.0 + sq(u + g));
}

double dfatsigmoid(double x, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("dfatsigmoid: requires tau > 0");
  const double u = x / tau;
  const double g = kFatSigmoidGamma;
  const double t = (u < 0.0) ? (u - g) : (u + g);
  if (std::abs(t) > 1e75) return 0.0;
  return (4.0 / 3.0) * std::abs(t) / sq(1.0 + t * t) / tau;
}

double log_fatsigmoid(double x, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("log_fatsigmoid: requires tau > 0");
  const double u = x / tau;
  const double g = kFatSigmoidGamma;
  if (u < 0.0) return std::log(2.0 / 3.0) - log1p_sq(u - g);
  return std::log1p(-(2.0 / 3.0) / (1.0 + sq(u + g)));
}

double dlog_fatsigmoid(double x, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("dlog_fatsigmoid: requires tau > 0");
  const double u = x / tau;
  const double g = kFatSigmoidGamma;
  if (u < 0.0) {
    // iota'/iota = 2(g - u) / (1 + (u - g)^2): polynomial left tail
    const double t = u - g;
    if (std::abs(t) > 1e150) return 2.0 / (std::abs(t) * tau);
    return 2.0 * (g - u) / (1.0 + t * t) / tau;
  }
  return dfatsigmoid(x, tau) / fatsigmoid(x, tau);
}

double logdiffexp(double a, double b) {
  if (!(a > b)) throw std::domain_error("logdiffexp: requires a > b");
  return a + log1mexp(b - a);
}

void dlogdiffexp(double a, double b, double& da, double& db) {
  if (!(a > b)) throw std::domain_error("dlogdiffexp: requires a > b");
  const double em = std::expm1(b - a);  // in (-1, 0)
  da = 1.0 / (-em);
  db = std::exp(b - a) / em;
}

double logsumexp(const Vec& v) {
  if (v.size() == 0) throw std::domain_error("logsumexp: empty input");
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf, or a +inf/NaN dominates
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

double logsumexp_weighted(const Vec& v, const Vec& log_w) {
  if (v.size() == 0) throw std::domain_error("logsumexp_weighted: empty input");
  if (v.size() != log_w.size())
    throw std::invalid_argument("logsumexp_weighted: size mismatch");
  return logsumexp((v + log_w).eval());
}

Vec logsumexp_grad(const Vec& v) {
  if (v.size() == 0) throw std::domain_error("logsumexp_grad: empty input");
  const double m = v.maxCoeff();
  Vec e = (v.array() - m).exp();
  return e / e.sum();
}

}  // namespace logbo
