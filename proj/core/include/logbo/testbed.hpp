#ifndef LOGBO_TESTBED_HPP
#define LOGBO_TESTBED_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "logbo/stable_math.hpp"

namespace logbo {

/// A synthetic benchmark problem. `evaluate` is deterministic and pure and
/// returns [objectives..., constraints...] in native coordinates; a
/// constraint value <= 0 is feasible. The unit-cube wrapper maps [0,1]^d
/// onto the native box affinely.
struct Problem {
  std::string name;
  int dim = 0;
  int num_objectives = 1;
  int num_constraints = 0;
  Mat bounds;  // d x 2 native box
  bool maximize = false;
  std::function<Vec(const Vec&)> evaluate;
  std::optional<double> known_optimum;  // native objective scale
  std::string optimum_provenance;
  double range_estimate = 1.0;  // objective range, used by the noise protocol
  Vec ref_point;                // bi-objective problems, maximization scale

  Vec to_native(const Vec& u) const;
  Vec to_unit(const Vec& x) const;
  Vec eval_unit(const Vec& u) const;
  /// Objective on the maximization scale the optimizer works with.
  double objective_max_scale(double raw_objective) const {
    return maximize ? raw_objective : -raw_objective;
  }
};

Problem sum_of_squares(int d);
Problem ackley(int d);
Problem michalewicz(int d);
Problem levy(int d);
Problem hartmann6();

/// Synthetic constrained problems with analytically known feasible optima.
std::vector<Problem> constrained_toy_suite();

/// Bi-objective problems with standard reference points.
std::vector<Problem> moo_suite();

/// sign(y) log(1 + |y|), applied to constraint observations before modeling.
double bilog(double y);

/// Problem registry addressable by name ("ackley16", "sos10", "hartmann6",
/// "toy-ball", "branincurrin", ...). Throws std::invalid_argument for
/// unknown names.
Problem make_problem(const std::string& name);
std::vector<std::string> problem_names();

}  // namespace logbo

#endif  // LOGBO_TESTBED_HPP
