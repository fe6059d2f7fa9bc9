#ifndef LOGBO_ACQ_MC_HPP
#define LOGBO_ACQ_MC_HPP

#include <memory>
#include <vector>

#include "logbo/acquisition.hpp"
#include "logbo/gp.hpp"

namespace logbo {

/// Sample-average-approximation settings shared by the MC acquisitions.
struct McOptions {
  int num_draws = 0;   // 0 picks the default for the batch size
  bool fat = true;     // fat-tailed smoothing; canonical softplus/sigmoid when false
  FatAlpha alpha;
};

/// 128 draws by default, 512 for joint batches q >= 16.
int default_num_draws(int q);

/// One constraint model for the Monte-Carlo constrained variants;
/// feasible iff the modeled value is <= threshold.
struct McConstraint {
  std::shared_ptr<const GpModel> model;
  double threshold = 0.0;
};

/// Hard Monte-Carlo qEI: mean over draws of max_j [xi_j - y*]_+ with hard
/// max/ReLU subgradients. Baseline and oracle for the smoothed variant.
class QeiMcAcquisition : public Acquisition {
 public:
  QeiMcAcquisition(std::shared_ptr<const GpModel> model, IncumbentState inc, int q,
                   McOptions opts, uint64_t seed, Mat pending = Mat(0, 0));

  std::string name() const override { return "qei"; }
  int dim() const override { return model_->dim(); }
  int max_batch() const override { return q_; }
  bool supports_pending() const override { return true; }
  std::unique_ptr<Acquisition> with_pending(const Mat& pending) const override;
  double eval(const Mat& X, Mat* grad) const override;
  double eval_impl(const Mat& X, Mat* grad) const;

  const Mat& base() const { return base_; }

 private:
  std::shared_ptr<const GpModel> model_;
  IncumbentState inc_;
  int q_;
  McOptions opts_;
  uint64_t seed_;
  Mat pending_;
  Mat base_;  // N x (p + q)
};

/// Smoothed log-space qEI / constrained qEI. The per-(draw, candidate)
/// utility is a smoothed log-improvement (log_fatplus by default) plus, for
/// each constraint, the log of a smooth indicator; draws and candidates are
/// reduced by a double logsumexp with the max-relaxation exponent tau_max,
/// and the Monte-Carlo mean enters as -log N. With no feasible incumbent the
/// improvement term is dropped and the summed log feasibility is maximized.
class QLogEiAcquisition : public Acquisition {
 public:
  QLogEiAcquisition(std::shared_ptr<const GpModel> objective, std::vector<McConstraint> constraints,
                    IncumbentState inc, Temperatures temps, int q, McOptions opts, uint64_t seed,
                    Mat pending = Mat(0, 0));

  std::string name() const override { return constraints_.empty() ? "qlogei" : "qlogcei"; }
  int dim() const override { return objective_->dim(); }
  int max_batch() const override { return q_; }
  bool supports_pending() const override { return true; }
  std::unique_ptr<Acquisition> with_pending(const Mat& pending) const override;
  double eval(const Mat& X, Mat* grad) const override;
  double eval_impl(const Mat& X, Mat* grad) const;

  const Mat& base() const { return base_; }

 private:
  std::shared_ptr<const GpModel> objective_;
  std::vector<McConstraint> constraints_;
  IncumbentState inc_;
  Temperatures temps_;
  int q_;
  McOptions opts_;
  uint64_t seed_;
  Mat pending_;
  Mat base_;                   // objective draws, N x (p + q)
  std::vector<Mat> con_base_;  // one per constraint
};

/// Noisy variant: the incumbent is the per-draw hard maximum of the joint
/// samples at the previously observed designs; gradients do not flow
/// through those columns. Otherwise identical to qLogEI.
class QLogNeiAcquisition : public Acquisition {
 public:
  QLogNeiAcquisition(std::shared_ptr<const GpModel> model, Temperatures temps, int q,
                     McOptions opts, uint64_t seed, Mat pending = Mat(0, 0));

  std::string name() const override { return "qlognei"; }
  int dim() const override { return model_->dim(); }
  int max_batch() const override { return q_; }
  bool supports_pending() const override { return true; }
  std::unique_ptr<Acquisition> with_pending(const Mat& pending) const override;
  double eval(const Mat& X, Mat* grad) const override;
  double eval_impl(const Mat& X, Mat* grad) const;

 private:
  std::shared_ptr<const GpModel> model_;
  Temperatures temps_;
  int q_;
  McOptions opts_;
  uint64_t seed_;
  Mat pending_;
  Mat base_;  // N x (n_obs + p + q)
};

}  // namespace logbo

#endif  // LOGBO_ACQ_MC_HPP
