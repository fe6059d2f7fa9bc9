#ifndef LOGBO_HARNESS_HPP
#define LOGBO_HARNESS_HPP

#include <map>
#include <string>
#include <vector>

#include "logbo/acq_opt.hpp"
#include "logbo/acquisition.hpp"
#include "logbo/gp.hpp"
#include "logbo/testbed.hpp"

namespace logbo {

struct RunConfig {
  std::string problem;
  std::string acq = "logei";
  int q = 1;
  int iterations = 25;
  int n_init = -1;  // -1: 2 * d
  int replicates = 1;
  uint64_t seed = 0;
  double noise_fraction = 0.0;
  Temperatures temps;
  OptimConfig opt;
  int num_draws = 0;  // 0: per-batch default
  bool fat_smoothing = true;
  bool record_timings = true;
  int jobs = 1;
  std::string out_path;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
};

/// One evaluated point of a BO run. `best` is the running best feasible
/// objective (or dominated hypervolume for bi-objective problems) computed
/// from noiseless function values on the problem's native scale
/// (maximization scale for single-objective problems).
struct TrialRecord {
  int replicate = 0;
  int iteration = 0;            // 0 for the initial design
  std::string phase = "init";   // init | bo | failed
  Vec x;                        // unit-cube coordinates
  Vec y;                        // raw (noisy) observations, objectives then constraints
  double best = 0.0;
  double acq_value = 0.0;
  int zero_grad_restarts = 0;
  double wall_ms = 0.0;
  uint64_t seed = 0;
};

/// Full experiment: per replicate, n_init seeded space-filling points, then
/// {standardize, fit, optimize acquisition, evaluate (+noise), append}.
/// Deterministic given seeds; replicates run in parallel when jobs > 1.
std::vector<TrialRecord> run_bo(const RunConfig& cfg);

void write_results(const std::vector<TrialRecord>& records, const std::string& path, int d,
                   int n_outputs);
std::vector<TrialRecord> read_results(const std::string& path, int* d_out = nullptr,
                                      int* n_outputs_out = nullptr);

/// Best-so-far trajectories: iteration index -> one value per replicate
/// (iteration 0 is the state after the initial design).
std::map<int, std::vector<double>> best_by_iteration(const std::vector<TrialRecord>& records);

struct GradFracRow {
  int d = 0;
  int n = 0;
  std::string acq;
  double fraction = 0.0;
};

/// Fraction of uniformly sampled points whose acquisition gradient
/// magnitude falls below `threshold`, for EI and LogEI, on the Ackley
/// problem with the cluster-plus-uniform data-generating process
/// (80% uniform, 20% Gaussian around the optimum with std 0.25 of the
/// domain, clamped to the box). Averaged over replicates; rows sorted by
/// (d, n).
std::vector<GradFracRow> grad_vanish_experiment(const std::vector<int>& dims,
                                                const std::vector<int>& ns, int replicates,
                                                uint64_t seed, double threshold = 1e-10,
                                                int test_points = 2000);

std::vector<std::string> acquisition_names();

}  // namespace logbo

#endif  // LOGBO_HARNESS_HPP
