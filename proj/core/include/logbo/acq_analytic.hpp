#ifndef LOGBO_ACQ_ANALYTIC_HPP
#define LOGBO_ACQ_ANALYTIC_HPP

#include <memory>
#include <vector>

#include "logbo/acquisition.hpp"
#include "logbo/gp.hpp"

namespace logbo {

/// log(phi(z) + z Phi(z)), the log of the expected-improvement h function.
/// Three branches: direct above -1, erfcx/log1mexp in the middle, and the
/// quadratic-plus-logarithmic asymptote below -1/sqrt(eps). Value and first
/// derivative are finite for every representable z.
double log_h(double z);
double dlog_h(double z);

/// Posterior standard deviations are floored at this value before forming
/// z = (mu - y*) / sigma.
inline constexpr double kAcqSigmaFloor = 1e-12;

// Scalar-level values and (d/dmu, d/dsigma) gradients; sigma is floored.
double ei_value(double mu, double sigma, double y_star, double* dmu = nullptr,
                double* dsigma = nullptr);
double logei_value(double mu, double sigma, double y_star, double* dmu = nullptr,
                   double* dsigma = nullptr);
double logpi_value(double mu, double sigma, double y_star, double* dmu = nullptr,
                   double* dsigma = nullptr);

/// One black-box constraint handled by analytic LogCEI: a GP on the
/// (transformed) constraint and the feasibility threshold on that scale.
struct ConstraintSpec {
  std::shared_ptr<const GpModel> model;
  double threshold = 0.0;  // feasible iff constraint value <= threshold
};

enum class AnalyticKind { kEi, kLogEi, kLogPi };

/// q = 1 acquisition over a single-objective model: EI (the numerically
/// naive baseline, kept as-is including its underflow region), LogEI, LogPI.
class AnalyticAcquisition : public Acquisition {
 public:
  AnalyticAcquisition(AnalyticKind kind, std::shared_ptr<const GpModel> model,
                      IncumbentState incumbent);

  std::string name() const override;
  int dim() const override { return model_->dim(); }
  int max_batch() const override { return 1; }
  double eval(const Mat& X, Mat* grad) const override;

  /// Whether the last evaluation hit the sigma floor.
  bool sigma_floored() const { return sigma_floored_; }
  double last_sigma() const { return last_sigma_; }

 private:
  AnalyticKind kind_;
  std::shared_ptr<const GpModel> model_;
  IncumbentState inc_;
  mutable bool sigma_floored_ = false;
  mutable double last_sigma_ = 0.0;
};

/// LogCEI = LogEI + sum_i log P(f_i <= threshold_i) with independent
/// constraint GPs. With no feasible incumbent, falls back to maximizing the
/// summed log probability of feasibility alone.
class LogCeiAcquisition : public Acquisition {
 public:
  LogCeiAcquisition(std::shared_ptr<const GpModel> objective,
                    std::vector<ConstraintSpec> constraints, IncumbentState incumbent);

  std::string name() const override { return "logcei"; }
  int dim() const override { return objective_->dim(); }
  int max_batch() const override { return 1; }
  double eval(const Mat& X, Mat* grad) const override;

 private:
  std::shared_ptr<const GpModel> objective_;
  std::vector<ConstraintSpec> constraints_;
  IncumbentState inc_;
};

}  // namespace logbo

#endif  // LOGBO_ACQ_ANALYTIC_HPP
