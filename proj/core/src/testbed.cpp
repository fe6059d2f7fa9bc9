#include "logbo/testbed.hpp"

#include <cmath>
#include <stdexcept>

#include "logbo/rng.hpp"

namespace logbo {

namespace {

Mat cube_bounds(int d, double lo, double hi) {
  Mat b(d, 2);
  b.col(0).setConstant(lo);
  b.col(1).setConstant(hi);
  return b;
}

// Deterministic objective range estimate over the native box: scrambled
// Halton sweep plus the known optimum when present.
void estimate_range(Problem& p, int samples = 4096) {
  Rng rng(0x8a2e);
  Mat U = halton_scrambled(samples, p.dim, rng);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < U.rows(); ++i) {
    const double f = p.eval_unit(U.row(i).transpose())[0];
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  if (p.known_optimum) {
    lo = std::min(lo, *p.known_optimum);
    hi = std::max(hi, *p.known_optimum);
  }
  p.range_estimate = std::max(hi - lo, 1e-12);
}

}  // namespace

Vec Problem::to_native(const Vec& u) const {
  Vec x(dim);
  for (int t = 0; t < dim; ++t) x[t] = bounds(t, 0) + u[t] * (bounds(t, 1) - bounds(t, 0));
  return x;
}

Vec Problem::to_unit(const Vec& x) const {
  Vec u(dim);
  for (int t = 0; t < dim; ++t) u[t] = (x[t] - bounds(t, 0)) / (bounds(t, 1) - bounds(t, 0));
  return u;
}

Vec Problem::eval_unit(const Vec& u) const { return evaluate(to_native(u)); }

Problem sum_of_squares(int d) {
  if (d < 1) throw std::invalid_argument("sum_of_squares: d >= 1");
  Problem p;
  p.name = "sos" + std::to_string(d);
  p.dim = d;
  p.bounds = cube_bounds(d, 0.0, 1.0);
  p.maximize = false;
  p.evaluate = [](const Vec& x) {
    Vec out(1);
    out[0] = (x.array() - 0.5).square().sum();
    return out;
  };
  p.known_optimum = 0.0;
  p.optimum_provenance = "closed form: 0 at x = 0.5";
  p.range_estimate = 0.25 * d;
  return p;
}

Problem ackley(int d) {
  if (d < 1) throw std::invalid_argument("ackley: d >= 1");
  Problem p;
  p.name = "ackley" + std::to_string(d);
  p.dim = d;
  p.bounds = cube_bounds(d, -32.768, 32.768);
  p.maximize = false;
  p.evaluate = [d](const Vec& x) {
    const double a = 20.0, b = 0.2, c = 2.0 * M_PI;
    const double s1 = x.squaredNorm() / d;
    const double s2 = x.array().unaryExpr([c](double v) { return std::cos(c * v); }).sum() / d;
    Vec out(1);
    out[0] = -a * std::exp(-b * std::sqrt(s1)) - std::exp(s2) + a + std::exp(1.0);
    return out;
  };
  p.known_optimum = 0.0;
  p.optimum_provenance = "closed form: 0 at the origin";
  estimate_range(p);
  return p;
}

Problem michalewicz(int d) {
  if (d < 1) throw std::invalid_argument("michalewicz: d >= 1");
  Problem p;
  p.name = "michalewicz" + std::to_string(d);
  p.dim = d;
  p.bounds = cube_bounds(d, 0.0, M_PI);
  p.maximize = false;
  p.evaluate = [](const Vec& x) {
    const double m = 10.0;  // standard steepness
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      const double si = std::sin(x[i]);
      const double sj = std::sin((i + 1) * x[i] * x[i] / M_PI);
      s += si * std::pow(sj, 2.0 * m);
    }
    Vec out(1);
    out[0] = -s;
    return out;
  };
  if (d == 2) {
    p.known_optimum = -1.8013;
    p.optimum_provenance = "literature value (m = 10)";
  } else if (d == 5) {
    p.known_optimum = -4.687658;
    p.optimum_provenance = "literature value (m = 10)";
  } else if (d == 10) {
    p.known_optimum = -9.66015;
    p.optimum_provenance = "literature value (m = 10)";
  }
  estimate_range(p);
  return p;
}

Problem levy(int d) {
  if (d < 1) throw std::invalid_argument("levy: d >= 1");
  Problem p;
  p.name = "levy" + std::to_string(d);
  p.dim = d;
  p.bounds = cube_bounds(d, -10.0, 10.0);
  p.maximize = false;
  p.evaluate = [](const Vec& x) {
    const int n = static_cast<int>(x.size());
    auto w = [&](int i) { return 1.0 + (x[i] - 1.0) / 4.0; };
    double s = std::pow(std::sin(M_PI * w(0)), 2);
    for (int i = 0; i < n - 1; ++i) {
      const double wi = w(i);
      s += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * std::pow(std::sin(M_PI * wi + 1.0), 2));
    }
    const double wn = w(n - 1);
    s += (wn - 1.0) * (wn - 1.0) * (1.0 + std::pow(std::sin(2.0 * M_PI * wn), 2));
    Vec out(1);
    out[0] = s;
    return out;
  };
  p.known_optimum = 0.0;
  p.optimum_provenance = "closed form: 0 at x = 1";
  estimate_range(p);
  return p;
}

Problem hartmann6() {
  Problem p;
  p.name = "hartmann6";
  p.dim = 6;
  p.bounds = cube_bounds(6, 0.0, 1.0);
  p.maximize = false;
  p.evaluate = [](const Vec& x) {
    static const double A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                   {0.05, 10, 17, 0.1, 8, 14},
                                   {3, 3.5, 1.7, 10, 17, 8},
                                   {17, 8, 0.05, 10, 0.1, 14}};
    static const double P[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                   {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                   {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                   {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
    static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
      double inner = 0.0;
      for (int j = 0; j < 6; ++j) inner += A[i][j] * (x[j] - P[i][j]) * (x[j] - P[i][j]);
      s -= alpha[i] * std::exp(-inner);
    }
    Vec out(1);
    out[0] = s;
    return out;
  };
  p.known_optimum = -3.3223680113913385;
  p.optimum_provenance = "literature location, value re-verified by local polish";
  estimate_range(p);
  return p;
}

double bilog(double y) { return y >= 0.0 ? std::log1p(y) : -std::log1p(-y); }

std::vector<Problem> constrained_toy_suite() {
  std::vector<Problem> out;

  // quadratic objective, norm-ball constraint active at the optimum:
  // max -sum (x - 0.7)^2  s.t.  |x|^2 <= 0.5; optimum at x = 0.5 * 1
  {
    Problem p;
    p.name = "toy-ball";
    p.dim = 2;
    p.num_constraints = 1;
    p.bounds = cube_bounds(2, 0.0, 1.0);
    p.maximize = true;
    p.evaluate = [](const Vec& x) {
      Vec out(2);
      out[0] = -(x.array() - 0.7).square().sum();
      out[1] = x.squaredNorm() - 0.5;
      return out;
    };
    p.known_optimum = -0.08;  // x = (0.5, 0.5), boundary of the ball
    p.optimum_provenance = "closed form: projection of 0.7*1 onto the ball";
    p.range_estimate = 0.98;
    out.push_back(std::move(p));
  }

  // same objective with a linear half-space x1 + x2 <= 0.8
  {
    Problem p;
    p.name = "toy-linear";
    p.dim = 2;
    p.num_constraints = 1;
    p.bounds = cube_bounds(2, 0.0, 1.0);
    p.maximize = true;
    p.evaluate = [](const Vec& x) {
      Vec out(2);
      out[0] = -(x.array() - 0.7).square().sum();
      out[1] = x.sum() - 0.8;
      return out;
    };
    p.known_optimum = -0.18;  // x = (0.4, 0.4)
    p.optimum_provenance = "closed form: projection of 0.7*1 onto the half-space";
    p.range_estimate = 0.98;
    out.push_back(std::move(p));
  }

  // fully feasible variant; the constraint never binds on the box
  {
    Problem p;
    p.name = "toy-feasible";
    p.dim = 2;
    p.num_constraints = 1;
    p.bounds = cube_bounds(2, 0.0, 1.0);
    p.maximize = true;
    p.evaluate = [](const Vec& x) {
      Vec out(2);
      out[0] = -(x.array() - 0.7).square().sum();
      out[1] = x.sum() - 3.0;
      return out;
    };
    p.known_optimum = 0.0;  // unconstrained optimum x = 0.7 * 1
    p.optimum_provenance = "closed form: interior optimum, constraint slack";
    p.range_estimate = 0.98;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Problem> moo_suite() {
  std::vector<Problem> out;

  // Branin-Currin on [0,1]^2, both objectives negated for maximization
  {
    Problem p;
    p.name = "branincurrin";
    p.dim = 2;
    p.num_objectives = 2;
    p.bounds = cube_bounds(2, 0.0, 1.0);
    p.maximize = true;
    p.evaluate = [](const Vec& u) {
      const double x1b = 15.0 * u[0] - 5.0;  // Branin domain
      const double x2b = 15.0 * u[1];
      const double branin =
          std::pow(x2b - 5.1 / (4.0 * M_PI * M_PI) * x1b * x1b + 5.0 / M_PI * x1b - 6.0, 2) +
          10.0 * (1.0 - 1.0 / (8.0 * M_PI)) * std::cos(x1b) + 10.0;
      const double x1 = u[0], x2 = u[1];
      const double denom = 100.0 * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
      double currin = (2300.0 * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0) / denom;
      if (x2 > 0.0) currin *= 1.0 - std::exp(-1.0 / (2.0 * x2));
      Vec out(2);
      out[0] = -branin;
      out[1] = -currin;
      return out;
    };
    p.ref_point = Vec(2);
    p.ref_point << -18.0, -6.0;
    p.range_estimate = 300.0;
    out.push_back(std::move(p));
  }

  // ZDT1 with d = 6, negated
  {
    Problem p;
    p.name = "zdt1";
    p.dim = 6;
    p.num_objectives = 2;
    p.bounds = cube_bounds(6, 0.0, 1.0);
    p.maximize = true;
    p.evaluate = [](const Vec& x) {
      const int d = static_cast<int>(x.size());
      const double f1 = x[0];
      double g = 0.0;
      for (int i = 1; i < d; ++i) g += x[i];
      g = 1.0 + 9.0 * g / (d - 1);
      const double f2 = g * (1.0 - std::sqrt(f1 / g));
      Vec out(2);
      out[0] = -f1;
      out[1] = -f2;
      return out;
    };
    p.ref_point = Vec(2);
    p.ref_point << -11.0, -11.0;
    p.range_estimate = 10.0;
    out.push_back(std::move(p));
  }

  // bi-objective DTLZ2 with d = 6, negated
  {
    Problem p;
    p.name = "dtlz2";
    p.dim = 6;
    p.num_objectives = 2;
    p.bounds = cube_bounds(6, 0.0, 1.0);
    p.maximize = true;
    p.evaluate = [](const Vec& x) {
      const int d = static_cast<int>(x.size());
      double g = 0.0;
      for (int i = 1; i < d; ++i) g += (x[i] - 0.5) * (x[i] - 0.5);
      const double f1 = (1.0 + g) * std::cos(x[0] * M_PI / 2.0);
      const double f2 = (1.0 + g) * std::sin(x[0] * M_PI / 2.0);
      Vec out(2);
      out[0] = -f1;
      out[1] = -f2;
      return out;
    };
    p.ref_point = Vec(2);
    p.ref_point << -1.1, -1.1;
    p.range_estimate = 2.0;
    out.push_back(std::move(p));
  }
  return out;
}

Problem make_problem(const std::string& name) {
  auto starts_with = [&](const std::string& prefix) {
    return name.rfind(prefix, 0) == 0 && name.size() > prefix.size();
  };
  auto dim_suffix = [&](const std::string& prefix) {
    return std::stoi(name.substr(prefix.size()));
  };
  try {
    if (name == "hartmann6") return hartmann6();
    if (starts_with("ackley")) return ackley(dim_suffix("ackley"));
    if (starts_with("michalewicz")) return michalewicz(dim_suffix("michalewicz"));
    if (starts_with("levy")) return levy(dim_suffix("levy"));
    if (starts_with("sos")) return sum_of_squares(dim_suffix("sos"));
    for (auto& p : constrained_toy_suite())
      if (p.name == name) return p;
    for (auto& p : moo_suite())
      if (p.name == name) return p;
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    // fall through to the unknown-name error
  }
  throw std::invalid_argument("unknown problem: " + name);
}

std::vector<std::string> problem_names() {
  std::vector<std::string> names = {"sos<d>", "ackley<d>", "michalewicz<d>", "levy<d>",
                                    "hartmann6"};
  for (auto& p : constrained_toy_suite()) names.push_back(p.name);
  for (auto& p : moo_suite()) names.push_back(p.name);
  return names;
}

}  // namespace logbo
