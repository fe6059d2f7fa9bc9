#ifndef LOGBO_ACQ_OPT_HPP
#define LOGBO_ACQ_OPT_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "logbo/acquisition.hpp"

namespace logbo {

enum class InitStrategy { kUniform, kBoltzmann };
enum class BatchMode { kJoint, kSequentialGreedy };

struct OptimConfig {
  int n_restarts = 16;
  int raw_candidates = 1024;  // Boltzmann pool size
  InitStrategy init_strategy = InitStrategy::kUniform;
  int max_iters = 200;
  double grad_tol = 1e-8;
  BatchMode mode = BatchMode::kJoint;
  uint64_t seed = 0;
};

struct RestartTrace {
  Vec start;
  Vec end;
  double value;
  int iterations;
  bool converged;
};

struct OptimReport {
  Mat best_x;  // q x d
  double best_value;
  std::vector<RestartTrace> restarts;
  int zero_grad_restarts = 0;      // restarts whose initial gradient is numerically zero
  bool init_fallback_uniform = false;
};

/// Objective with gradient, maximized over a box.
using BoxObjective = std::function<double(const Vec&, Vec*)>;

/// Projected-gradient L-BFGS (history 10) with Armijo backtracking,
/// maximizing over [lo, hi]. Never leaves the box. Throws if the objective
/// is non-finite at x0; non-finite trial steps are rejected by the line
/// search.
Vec lbfgsb_local(const BoxObjective& f, Vec x0, const Vec& lo, const Vec& hi, int max_iters,
                 double grad_tol, double* value_out = nullptr, int* iters_out = nullptr,
                 bool* converged_out = nullptr);

/// Softmax of standardized values; the sampling weights of Boltzmann
/// initialization (exposed for tests).
Vec boltzmann_weights(const Vec& values);

/// Restart starting points as an n_restarts x (q*d) matrix, each row one
/// flattened batch in the unit cube.
Mat initialize_restarts(const Acquisition& acq, int q, const OptimConfig& cfg,
                        bool* fell_back_to_uniform = nullptr);

/// Multi-start maximization of an acquisition over the unit cube; joint or
/// sequential-greedy batch construction. Throws if no restart succeeds.
OptimReport optimize_acq(const Acquisition& acq, int q, const OptimConfig& cfg);

/// Gradient magnitude below which a restart counts as numerically stuck.
inline constexpr double kZeroGradThreshold = 1e-10;

}  // namespace logbo

#endif  // LOGBO_ACQ_OPT_HPP
