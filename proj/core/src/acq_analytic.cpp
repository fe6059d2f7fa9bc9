#include "logbo/acq_analytic.hpp"

#include <cmath>

namespace logbo {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double npdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double ncdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

}  // namespace

double log_h(double z) {
  const auto& c = StableConstants::get();
  if (z > -1.0) {
    return std::log(npdf(z) + z * ncdf(z));
  }
  if (z > -c.inv_sqrt_eps) {
    const double w = std::log(erfcx(-z / kSqrt2) * std::abs(z)) + c.c2;
    return -0.5 * z * z - c.c1 + log1mexp(w);
  }
  return -0.5 * z * z - c.c1 - 2.0 * std::log(std::abs(z));
}

double dlog_h(double z) {
  const auto& c = StableConstants::get();
  if (z <= -c.inv_sqrt_eps) return -z - 2.0 / z;
  // h'(z) = Phi(z), so (log h)' = exp(log Phi - log h)
  return std::exp(log_ndtr(z) - log_h(z));
}

double ei_value(double mu, double sigma, double y_star, double* dmu, double* dsigma) {
  sigma = std::max(sigma, kAcqSigmaFloor);
  const double z = (mu - y_star) / sigma;
  const double Phi = ncdf(z);
  const double phi = npdf(z);
  if (dmu) *dmu = Phi;
  if (dsigma) *dsigma = phi;
  return sigma * (phi + z * Phi);
}

double logei_value(double mu, double sigma, double y_star, double* dmu, double* dsigma) {
  sigma = std::max(sigma, kAcqSigmaFloor);
  const double z = (mu - y_star) / sigma;
  const double dz = dlog_h(z);
  if (dmu) *dmu = dz / sigma;
  if (dsigma) *dsigma = (1.0 - dz * z) / sigma;
  return log_h(z) + std::log(sigma);
}

double logpi_value(double mu, double sigma, double y_star, double* dmu, double* dsigma) {
  sigma = std::max(sigma, kAcqSigmaFloor);
  const double z = (mu - y_star) / sigma;
  const double dz = dlog_ndtr(z);
  if (dmu) *dmu = dz / sigma;
  if (dsigma) *dsigma = -dz * z / sigma;
  return log_ndtr(z);
}

AnalyticAcquisition::AnalyticAcquisition(AnalyticKind kind, std::shared_ptr<const GpModel> model,
                                         IncumbentState incumbent)
    : kind_(kind), model_(std::move(model)), inc_(incumbent) {}

std::string AnalyticAcquisition::name() const {
  switch (kind_) {
    case AnalyticKind::kEi: return "ei";
    case AnalyticKind::kLogEi: return "logei";
    case AnalyticKind::kLogPi: return "logpi";
  }
  return "?";
}

double AnalyticAcquisition::eval(const Mat& X, Mat* grad) const {
  if (X.rows() != 1) throw std::invalid_argument(name() + ": q = 1 only");
  const Vec x = X.row(0);
  double mu, sigma, dm, ds;
  Vec dmu, dsigma;
  if (grad) {
    model_->predict_grad(x, mu, sigma, dmu, dsigma);
  } else {
    model_->predict(x, mu, sigma);
  }
  last_sigma_ = std::max(sigma, kAcqSigmaFloor);
  sigma_floored_ = sigma < kAcqSigmaFloor;
  double v = 0.0;
  switch (kind_) {
    case AnalyticKind::kEi: v = ei_value(mu, sigma, inc_.y_star, &dm, &ds); break;
    case AnalyticKind::kLogEi: v = logei_value(mu, sigma, inc_.y_star, &dm, &ds); break;
    case AnalyticKind::kLogPi: v = logpi_value(mu, sigma, inc_.y_star, &dm, &ds); break;
  }
  if (grad) grad->row(0) = (dm * dmu + ds * dsigma).transpose();
  return v;
}

LogCeiAcquisition::LogCeiAcquisition(std::shared_ptr<const GpModel> objective,
                                     std::vector<ConstraintSpec> constraints,
                                     IncumbentState incumbent)
    : objective_(std::move(objective)), constraints_(std::move(constraints)), inc_(incumbent) {}

double LogCeiAcquisition::eval(const Mat& X, Mat* grad) const {
  if (X.rows() != 1) throw std::invalid_argument("logcei: q = 1 only");
  const Vec x = X.row(0);
  double value = 0.0;
  Vec g = Vec::Zero(dim());

  if (inc_.has_feasible) {
    double mu, sigma, dm, ds;
    Vec dmu, dsigma;
    if (grad) {
      objective_->predict_grad(x, mu, sigma, dmu, dsigma);
      value += logei_value(mu, sigma, inc_.y_star, &dm, &ds);
      g += dm * dmu + ds * dsigma;
    } else {
      objective_->predict(x, mu, sigma);
      value += logei_value(mu, sigma, inc_.y_star);
    }
  }
  // else: pure log probability of feasibility below

  for (const auto& con : constraints_) {
    double mu, sigma;
    Vec dmu, dsigma;
    if (grad) {
      con.model->predict_grad(x, mu, sigma, dmu, dsigma);
    } else {
      con.model->predict(x, mu, sigma);
    }
    const double sig = std::max(sigma, kAcqSigmaFloor);
    const double z = (con.threshold - mu) / sig;  // P(f <= thr) = Phi(z)
    value += log_ndtr(z);
    if (grad) {
      const double dz = dlog_ndtr(z);
      g += dz * (-dmu / sig - z * dsigma / sig);
    }
  }
  if (grad) grad->row(0) = g.transpose();
  return value;
}

}  // namespace logbo
