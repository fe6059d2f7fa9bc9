#ifndef LOGBO_ACQUISITION_HPP
#define LOGBO_ACQUISITION_HPP

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "logbo/stable_math.hpp"

namespace logbo {

/// Smoothing temperatures of the Monte-Carlo acquisitions.
struct Temperatures {
  double tau_0 = 1e-6;     // softplus / fatplus
  double tau_max = 1e-2;   // max relaxation exponent, in (0, 1]
  double tau_cons = 1e-2;  // constraint sigmoid

  void validate() const {
    if (!(tau_0 > 0.0) || !(tau_max > 0.0) || !(tau_cons > 0.0))
      throw std::domain_error("Temperatures: all must be positive");
    if (tau_max > 1.0) throw std::domain_error("Temperatures: tau_max must be in (0, 1]");
  }
};

/// Best observed (feasible) objective on the standardized scale.
struct IncumbentState {
  double y_star = 0.0;
  bool has_feasible = true;  // false when no feasible point exists yet
};

/// Acquisition value together with its gradient w.r.t. the q x d candidate
/// coordinates.
struct AcqResult {
  double value = 0.0;
  Mat grad;
};

/// Scalar criterion over candidate batches, maximized by the optimizer.
/// Implementations must be pure given construction state (frozen base
/// samples make the MC variants deterministic).
class Acquisition {
 public:
  virtual ~Acquisition() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  /// Largest supported batch size (1 for analytic acquisitions).
  virtual int max_batch() const = 0;
  /// Whether sequential-greedy conditioning on pending points is available.
  virtual bool supports_pending() const { return false; }
  /// A copy conditioned on pending (already selected, unobserved) points.
  virtual std::unique_ptr<Acquisition> with_pending(const Mat& /*pending*/) const {
    throw std::logic_error(name() + ": pending points not supported");
  }

  /// Value at batch X (q x d); fills *grad (q x d) when non-null.
  virtual double eval(const Mat& X, Mat* grad) const = 0;

  AcqResult eval_with_grad(const Mat& X) const {
    AcqResult r;
    r.grad.setZero(X.rows(), X.cols());
    r.value = eval(X, &r.grad);
    return r;
  }
};

/// Lexicographic row order of a candidate batch. The Monte-Carlo
/// acquisitions pair frozen base draws with candidates in this canonical
/// order, which makes their values exactly permutation-invariant.
std::vector<int> canonical_batch_order(const Mat& X);

}  // namespace logbo

#endif  // LOGBO_ACQUISITION_HPP
