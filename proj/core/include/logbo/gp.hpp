#ifndef LOGBO_GP_HPP
#define LOGBO_GP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "logbo/stable_math.hpp"

namespace logbo {

/// Per-output affine standardization y -> (y - mean) / std.
struct Standardizer {
  double mean = 0.0;
  double std = 1.0;
  double apply(double y) const { return (y - mean) / std; }
  double invert(double z) const { return mean + std * z; }
};

/// Inputs in the unit cube, outputs standardized per column.
/// Standardization constants are kept for de-standardization.
struct DataSet {
  Mat inputs;   // n x d
  Mat outputs;  // n x M, standardized
  std::vector<Standardizer> scalers;

  static DataSet standardized(const Mat& inputs_unit, const Mat& outputs_raw);
  int n() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
  int num_outputs() const { return static_cast<int>(outputs.cols()); }
};

struct GpHyperparams {
  Vec lengthscales;              // d entries in [ls_lower, ls_upper]
  double signal_variance = 1.0;
  double noise_variance = 1e-6;
  double mean_constant = 0.0;
};

/// Matern-5/2 covariance with per-dimension lengthscales.
double kernel_matern52_ard(const Vec& a, const Vec& b, const GpHyperparams& hp);

/// Joint Gaussian belief over the outputs at a batch of points.
struct PosteriorGaussian {
  Vec mean;       // Q
  Mat cov;        // Q x Q
  Mat chol;       // lower Cholesky factor of cov + jitter
  double jitter = 0.0;

  double mu() const { return mean[0]; }
  double sigma() const { return std::sqrt(std::max(cov(0, 0), 0.0)); }
};

struct FitOptions {
  int restarts = 4;
  int max_iters = 100;
  double noise_floor = 1e-6;
  bool fix_noise_to_floor = false;  // exact-interpolation mode
  double ls_lower = 0.01;
  double ls_upper = 100.0;
};

/// Single-output Matern-5/2 ARD Gaussian process. Immutable once built;
/// safe to share across threads.
class GpModel {
 public:
  /// Conditions on data with the given hyperparameters (n may be 0).
  GpModel(Mat X, Vec y, GpHyperparams hp);

  /// Type-II maximum likelihood via seeded multi-start bound-constrained
  /// quasi-Newton. Requires n >= 2. Deterministic given (data, seed).
  static GpModel fit(const Mat& X, const Vec& y, const FitOptions& opts, uint64_t seed);

  const GpHyperparams& hyperparams() const { return hp_; }
  const Mat& train_inputs() const { return X_; }
  const Vec& train_outputs() const { return y_; }
  int dim() const { return dim_; }
  int num_points() const { return static_cast<int>(X_.rows()); }

  /// Scalar posterior at one point.
  void predict(const Vec& x, double& mu, double& sigma) const;

  /// Scalar posterior with analytic input gradients. When sigma falls below
  /// the jitter floor, dsigma is the derivative of the jittered sigma.
  void predict_grad(const Vec& x, double& mu, double& sigma, Vec& dmu, Vec& dsigma) const;

  /// Joint posterior over the rows of P (escalating jitter ladder on the
  /// Cholesky, 1e-8 .. 1e-4 times the mean diagonal).
  PosteriorGaussian posterior(const Mat& P) const;

  /// Derivative of (mean, cov) of posterior(P) w.r.t. coordinate (row, t) of P.
  /// dcov has nonzero entries only in row/column `row`.
  void posterior_coord_grad(const Mat& P, const PosteriorGaussian& post, int row, int t,
                            Vec& dmean, Mat& dcov) const;

  /// Log marginal likelihood of the training data under hp (requires n >= 1).
  /// The optional gradient is w.r.t. [log lengthscales (d), log signal_variance,
  /// log noise_variance, mean_constant].
  static double log_marginal_likelihood(const Mat& X, const Vec& y, const GpHyperparams& hp,
                                        Vec* grad_theta = nullptr);

  std::string to_json(const Standardizer& scaler, bool include_data) const;
  static GpModel from_json(const std::string& text, Standardizer* scaler);

 private:
  Mat X_;
  Vec y_;
  GpHyperparams hp_;
  int dim_;
  Eigen::LLT<Mat> llt_;  // factor of K + sigma_n^2 I
  Vec alpha_;            // (K + sigma_n^2 I)^-1 (y - m)
};

/// Joint reparameterized draws xi = mean + L * eps over [prefix; X].
/// Prefix rows come first, so with a lower-triangular factor their samples
/// do not move with the candidate coordinates.
struct JointDraws {
  Mat points;   // (p+q) x d
  PosteriorGaussian post;
  Mat samples;  // N x (p+q), prefix columns first
};

/// Samples the joint posterior over [prefix; X] using the frozen base
/// normals (N x (p+q)).
JointDraws draw_joint(const GpModel& model, const Mat& prefix, const Mat& X, const Mat& base);

/// Accumulates the gradient of a scalar F of the samples into gx (q x d),
/// given dF/dsamples for the candidate columns only (N x q). Chains through
/// the posterior mean and the Cholesky factor via
/// dL = L Phi(L^-1 dSigma L^-T) with Phi halving the diagonal.
void backprop_joint(const GpModel& model, const JointDraws& draws, const Mat& base,
                    const Mat& dF_cand, Mat& gx);

}  // namespace logbo

#endif  // LOGBO_GP_HPP
