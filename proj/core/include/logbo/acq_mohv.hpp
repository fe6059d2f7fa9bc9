#ifndef LOGBO_ACQ_MOHV_HPP
#define LOGBO_ACQ_MOHV_HPP

#include <atomic>
#include <memory>
#include <vector>

#include "logbo/acquisition.hpp"
#include "logbo/gp.hpp"

namespace logbo {

/// Maximal non-dominated subset of the rows of Y (maximization, M = 2).
/// Sort-based, O(n log n); equal points are all retained.
Mat pareto_filter(const Mat& Y);

/// Mutually non-dominated points above a reference point.
struct ParetoFrontier {
  Mat points;  // n x 2, sorted by first objective descending
  Vec ref;

  /// Filters Y to the frontier and drops points that do not strictly
  /// dominate the reference point.
  static ParetoFrontier build(const Mat& Y, const Vec& ref);
};

/// Exact dominated hypervolume for M = 2 via a descending sweep.
double hypervolume(const ParetoFrontier& front);
double hypervolume(const Mat& Y, const Vec& ref);

/// Axis-aligned boxes partitioning the non-dominated region between the
/// reference point and a finite upper bound: the staircase of |P|+1 slabs.
struct BoxDecomposition {
  Mat lower;  // K x 2
  Mat upper;  // K x 2

  static BoxDecomposition build(const ParetoFrontier& front, const Vec& upper_bound);
  int size() const { return static_cast<int>(lower.rows()); }
};

/// Exact hypervolume improvement of a q x 2 batch of objective vectors via
/// the inclusion-exclusion principle over the decomposition. Hard-ReLU
/// variant, used as the oracle and inside the hard qEHVI baseline.
/// Refuses q > 10 (2^q - 1 terms).
double hvi_inclusion_exclusion(const Mat& Ybatch, const BoxDecomposition& decomp);

/// Hard Monte-Carlo qEHVI: mean over joint draws of the exact hypervolume
/// improvement, with subgradients through the hard min/ReLU operations.
class QEhviAcquisition : public Acquisition {
 public:
  QEhviAcquisition(std::vector<std::shared_ptr<const GpModel>> models, ParetoFrontier front,
                   BoxDecomposition decomp, int q, int num_draws, uint64_t seed,
                   Mat pending = Mat(0, 0));

  std::string name() const override { return "qehvi"; }
  int dim() const override { return models_[0]->dim(); }
  int max_batch() const override { return q_; }
  bool supports_pending() const override { return true; }
  std::unique_ptr<Acquisition> with_pending(const Mat& pending) const override;
  double eval(const Mat& X, Mat* grad) const override;
  double eval_impl(const Mat& X, Mat* grad) const;

 private:
  std::vector<std::shared_ptr<const GpModel>> models_;
  ParetoFrontier front_;
  BoxDecomposition decomp_;
  int q_;
  int num_draws_;
  uint64_t seed_;
  Mat pending_;
  std::vector<Mat> base_;  // one per objective
};

/// Smoothed log-space qEHVI: the min is -fatmax(-x), the ReLU fatplus,
/// products become sums of log_fatplus, the (box, subset) sums are reduced
/// into positive and negative logsumexp accumulators combined by
/// logdiffexp, and the draw mean enters as logsumexp - log N. Draws whose
/// smoothed negative part exceeds the positive part are clamped to the
/// floor -745 with zero gradient and counted.
class QLogEhviAcquisition : public Acquisition {
 public:
  QLogEhviAcquisition(std::vector<std::shared_ptr<const GpModel>> models, ParetoFrontier front,
                      BoxDecomposition decomp, Temperatures temps, int q, int num_draws,
                      uint64_t seed, bool expected_log_hv = false, Mat pending = Mat(0, 0));

  std::string name() const override { return "qlogehvi"; }
  int dim() const override { return models_[0]->dim(); }
  int max_batch() const override { return q_; }
  bool supports_pending() const override { return true; }
  std::unique_ptr<Acquisition> with_pending(const Mat& pending) const override;
  double eval(const Mat& X, Mat* grad) const override;
  double eval_impl(const Mat& X, Mat* grad) const;

  long clamped_draws() const { return clamped_draws_.load(); }
  long clipped_samples() const { return clipped_samples_.load(); }

 private:
  std::vector<std::shared_ptr<const GpModel>> models_;
  ParetoFrontier front_;
  BoxDecomposition decomp_;
  Temperatures temps_;
  int q_;
  int num_draws_;
  uint64_t seed_;
  bool expected_log_hv_;
  Mat pending_;
  std::vector<Mat> base_;
  mutable std::atomic<long> clamped_draws_{0};
  mutable std::atomic<long> clipped_samples_{0};
};

/// Componentwise max of observed objectives plus 10% range padding; the
/// finite stand-in for the decomposition's unbounded upper vertices.
Vec objective_upper_bound(const Mat& Y_observed, const Vec& ref);

}  // namespace logbo

#endif  // LOGBO_ACQ_MOHV_HPP
