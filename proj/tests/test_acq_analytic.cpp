#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "logbo/acq_analytic.hpp"
#include "logbo/rng.hpp"

using namespace logbo;

namespace {

double rel_err(double got, double ref) {
  return std::abs(got - ref) / std::max(std::abs(ref), 1e-300);
}

std::shared_ptr<GpModel> toy_model(Rng& rng, int n, int d) {
  Mat X = rng.uniform_matrix(n, d);
  Vec y(n);
  for (int i = 0; i < n; ++i)
    y[i] = std::sin(4.0 * X(i, 0)) + 0.3 * rng.normal();
  GpHyperparams hp;
  hp.lengthscales = Vec::Constant(d, 0.3);
  hp.noise_variance = 1e-4;
  return std::make_shared<GpModel>(X, y, hp);
}

}  // namespace

TEST_CASE("log_h values across all branches") {
  CHECK(rel_err(log_h(0.0), -0.9189385332046728) < 1e-14);
  CHECK(std::abs(log_h(-10.0) - (-55.55312203612235)) < 1e-9);
  CHECK(std::abs(log_h(-40.0) - (-808.29856835662)) < 1e-8);

  // third branch equals its formula exactly
  const auto& c = StableConstants::get();
  const double z = -1e9;
  CHECK(log_h(z) == -0.5 * z * z - c.c1 - 2.0 * std::log(std::abs(z)));
  CHECK(z < -c.inv_sqrt_eps);

  // value and derivative finite everywhere, including branch points
  for (double zz : {1e8, 10.0, 0.0, -0.999, -1.0, -1.001, -1e4, -1e6, -6.7e7, -1e9, -1e12}) {
    CHECK(std::isfinite(log_h(zz)));
    CHECK(std::isfinite(dlog_h(zz)));
  }
  // branch continuity at z = -1 and z = -1/sqrt(eps)
  CHECK(std::abs(log_h(std::nextafter(-1.0, 0.0)) - log_h(std::nextafter(-1.0, -2.0))) < 1e-10);
  const double zb = -c.inv_sqrt_eps;
  CHECK(rel_err(log_h(std::nextafter(zb, 0.0)), log_h(std::nextafter(zb, -1e30))) < 1e-12);
}

TEST_CASE("log_h fixture rows") {
  std::ifstream in(std::string(LOGBO_DATA_DIR) + "/oracles.tsv");
  REQUIRE(in.good());
  const auto& c = StableConstants::get();
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string name, xs, rs;
    std::getline(ss, name, '\t');
    if (name != "log_h") continue;
    std::getline(ss, xs, '\t');
    std::getline(ss, rs);
    const double x = std::strtod(xs.c_str(), nullptr);
    const double ref = std::strtod(rs.c_str(), nullptr);
    const bool mid = x <= -1.0 && x > -c.inv_sqrt_eps;
    CHECK(rel_err(log_h(x), ref) < (mid ? 1e-9 : 1e-12));
    ++rows;
  }
  CHECK(rows == 200);
}

TEST_CASE("dlog_h matches finite differences away from branch points") {
  Rng rng(61);
  for (int i = 0; i < 200; ++i) {
    const double z = rng.uniform(-30.0, 5.0);
    if (std::abs(z + 1.0) < 0.05) continue;
    const double h = std::cbrt(StableConstants::get().eps) * std::max(1.0, std::abs(z));
    const double fdg = (log_h(z + h) - log_h(z - h)) / (2 * h);
    CHECK(rel_err(dlog_h(z), fdg) < 1e-5);
  }
  // deep asymptote: derivative approaches -z
  CHECK(dlog_h(-1e9) == doctest::Approx(1e9).epsilon(1e-12));
}

TEST_CASE("ei scalar values") {
  CHECK(rel_err(ei_value(1.0, 1.0, 1.0), 0.3989422804014327) < 1e-13);
  // the documented pathological underflow of the naive form
  CHECK(ei_value(-40.0, 1.0, 0.0) == 0.0);
  // pure exploitation limit: sigma -> 0 with positive mean gap
  CHECK(ei_value(1.0, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("logei scalar values and identities") {
  CHECK(rel_err(logei_value(1.0, 1.0, 1.0), -0.9189385332046727) < 1e-13);
  CHECK(std::abs(logei_value(-40.0, 1.0, 0.0) - (-808.29856835662)) < 1e-8);
  Rng rng(67);
  for (int i = 0; i < 500; ++i) {
    const double z = rng.uniform(-30.0, 10.0);
    const double sigma = std::pow(10.0, rng.uniform(-2.0, 1.0));
    const double ystar = rng.uniform(-2.0, 2.0);
    const double mu = ystar + z * sigma;
    const double le = logei_value(mu, sigma, ystar);
    const double e = ei_value(mu, sigma, ystar);
    if (e > 0.0) CHECK(rel_err(std::exp(le), e) < 1e-12);
  }
  // monotone increasing in mu, gradient never numerically zero
  double prev = -std::numeric_limits<double>::infinity();
  for (double z = -1e8; z <= 1e8 && z != 0.0; z *= -0.97) {
    const double v = logei_value(z, 1.0, 0.0);
    if (z > 0.0) {
      CHECK(v > prev);
      prev = v;
    }
    CHECK(std::abs(dlog_h(z)) > 1e-12);
  }
  double lo = -std::numeric_limits<double>::infinity();
  for (double mu = -50.0; mu <= 50.0; mu += 0.5) {
    const double v = logei_value(mu, 1.0, 0.0);
    CHECK(v > lo);
    lo = v;
  }
}

TEST_CASE("logei/logpi gradients vs finite differences on random triples") {
  Rng rng(71);
  for (int i = 0; i < 100; ++i) {
    const double sigma = std::pow(10.0, rng.uniform(-1.5, 0.5));
    const double ystar = rng.uniform(-1.0, 1.0);
    const double mu = ystar + sigma * rng.uniform(-20.0, 5.0);
    double dmu, dsigma;
    logei_value(mu, sigma, ystar, &dmu, &dsigma);
    const double hm = 1e-6 * std::max(1.0, std::abs(mu));
    const double hs = 1e-6 * sigma;
    const double fdm =
        (logei_value(mu + hm, sigma, ystar) - logei_value(mu - hm, sigma, ystar)) / (2 * hm);
    const double fds =
        (logei_value(mu, sigma + hs, ystar) - logei_value(mu, sigma - hs, ystar)) / (2 * hs);
    CHECK(rel_err(dmu, fdm) < 1e-5);
    CHECK(rel_err(dsigma, fds) < 1e-4);

    logpi_value(mu, sigma, ystar, &dmu, &dsigma);
    const double fdm2 =
        (logpi_value(mu + hm, sigma, ystar) - logpi_value(mu - hm, sigma, ystar)) / (2 * hm);
    CHECK(rel_err(dmu, fdm2) < 1e-5);
  }
}

TEST_CASE("logpi values") {
  CHECK(logpi_value(0.5, 1.0, 0.5) == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(std::abs(logpi_value(-30.0, 1.0, 0.0) - (-454.3212439563432)) < 1e-8);
  double prev = -std::numeric_limits<double>::infinity();
  for (double mu = -5.0; mu <= 5.0; mu += 0.1) {
    const double v = logpi_value(mu, 0.7, 0.0);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("model-level acquisitions propagate gradients") {
  Rng rng(73);
  auto model = toy_model(rng, 10, 2);
  IncumbentState inc{0.8, true};
  for (AnalyticKind kind : {AnalyticKind::kEi, AnalyticKind::kLogEi, AnalyticKind::kLogPi}) {
    AnalyticAcquisition acq(kind, model, inc);
    for (int rep = 0; rep < 10; ++rep) {
      Mat X = rng.uniform_matrix(1, 2);
      Mat g(1, 2);
      const double v = acq.eval(X, &g);
      CHECK(std::isfinite(v));
      for (int t = 0; t < 2; ++t) {
        Mat Xp = X, Xm = X;
        const double h = 1e-6;
        Xp(0, t) += h;
        Xm(0, t) -= h;
        const double fdg = (acq.eval(Xp, nullptr) - acq.eval(Xm, nullptr)) / (2 * h);
        if (std::abs(fdg) > 1e-12 || std::abs(g(0, t)) > 1e-12)
          CHECK(std::abs(g(0, t) - fdg) <= 1e-4 * std::max(1.0, std::abs(fdg)));
      }
    }
    Mat X2 = rng.uniform_matrix(2, 2);
    CHECK_THROWS_AS(acq.eval(X2, nullptr), std::invalid_argument);
  }
}

TEST_CASE("logcei composes logei with log feasibility") {
  Rng rng(79);
  auto objective = toy_model(rng, 10, 2);
  IncumbentState inc{0.5, true};

  // zero constraints: identical to logei
  LogCeiAcquisition cei(objective, {}, inc);
  AnalyticAcquisition logei(AnalyticKind::kLogEi, objective, inc);
  Mat X = rng.uniform_matrix(1, 2);
  CHECK(cei.eval(X, nullptr) == logei.eval(X, nullptr));

  // constant-zero constraint observations give mu_c = 0: each point
  // contributes P(feasible) = 1/2
  Mat Xc = rng.uniform_matrix(6, 2);
  GpHyperparams hpc;
  hpc.lengthscales = Vec::Constant(2, 0.5);
  hpc.noise_variance = 1e-6;
  auto con = std::make_shared<GpModel>(Xc, Vec::Zero(6), hpc);
  LogCeiAcquisition cei1(objective, {{con, 0.0}}, inc);
  const double got = cei1.eval(X, nullptr);
  const double want = logei.eval(X, nullptr) - std::log(2.0);
  CHECK(std::abs(got - want) < 1e-6);

  // deeply violated constraint: log form finite, naive product underflows
  GpHyperparams hpv = hpc;
  hpv.mean_constant = 20.0;  // z_c = -20 under the prior
  auto viol = std::make_shared<GpModel>(Mat(0, 2), Vec(0), hpv);
  IncumbentState far{35.0, true};
  LogCeiAcquisition cei2(objective, {{viol, 0.0}}, far);
  AnalyticAcquisition ei(AnalyticKind::kEi, objective, far);
  AnalyticAcquisition logei_far(AnalyticKind::kLogEi, objective, far);
  const double lv = cei2.eval(X, nullptr);
  CHECK(std::isfinite(lv));
  double muc, sigc;
  viol->predict(X.row(0).transpose(), muc, sigc);
  const double expect = logei_far.eval(X, nullptr) + log_ndtr((0.0 - muc) / sigc);
  CHECK(std::abs(lv - expect) < 1e-9);
  const double naive = ei.eval(X, nullptr) * std::exp(log_ndtr(-muc / sigc));
  CHECK(naive == 0.0);

  // no feasible incumbent: pure log probability of feasibility
  IncumbentState none{0.0, false};
  LogCeiAcquisition cei3(objective, {{con, 0.0}}, none);
  CHECK(cei3.eval(X, nullptr) == doctest::Approx(-std::log(2.0)).epsilon(1e-4));

  // gradient of the composite
  LogCeiAcquisition cei4(objective, {{con, 0.0}}, inc);
  Mat g(1, 2);
  const double v0 = cei4.eval(X, &g);
  CHECK(std::isfinite(v0));
  for (int t = 0; t < 2; ++t) {
    Mat Xp = X, Xm = X;
    const double h = 1e-6;
    Xp(0, t) += h;
    Xm(0, t) -= h;
    const double fdg = (cei4.eval(Xp, nullptr) - cei4.eval(Xm, nullptr)) / (2 * h);
    CHECK(std::abs(g(0, t) - fdg) <= 1e-4 * std::max(1.0, std::abs(fdg)));
  }
}

TEST_CASE("maximizer equivalence of EI and LogEI on dense grids") {
  Rng rng(83);
  int tested = 0;
  for (int rep = 0; rep < 10; ++rep) {
    auto model = toy_model(rng, 6, 1);
    const double ystar = model->train_outputs().maxCoeff();
    AnalyticAcquisition ei(AnalyticKind::kEi, model, {ystar, true});
    AnalyticAcquisition logei(AnalyticKind::kLogEi, model, {ystar, true});
    const int G = 2000;
    int argmax_ei = -1, argmax_logei = -1;
    double best_ei = -1.0, best_logei = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < G; ++i) {
      Mat X(1, 1);
      X << (i + 0.5) / G;
      const double e = ei.eval(X, nullptr);
      const double le = logei.eval(X, nullptr);
      if (e > best_ei) {
        best_ei = e;
        argmax_ei = i;
      }
      if (le > best_logei) {
        best_logei = le;
        argmax_logei = i;
      }
    }
    if (best_ei > 0.0) {
      CHECK(argmax_ei == argmax_logei);
      ++tested;
    }
  }
  CHECK(tested >= 8);
}

TEST_CASE("sigma floor is applied and reported") {
  Mat X(1, 1);
  X << 0.5;
  Vec y(1);
  y << 1.0;
  GpHyperparams hp;
  hp.lengthscales = Vec::Constant(1, 0.4);
  hp.noise_variance = 0.0;
  auto m = std::make_shared<GpModel>(X, y, hp);
  AnalyticAcquisition acq(AnalyticKind::kLogEi, m, {0.0, true});
  Mat Xq(1, 1);
  Xq << 0.5;
  const double v = acq.eval(Xq, nullptr);
  CHECK(std::isfinite(v));
  CHECK(acq.sigma_floored());
  CHECK(acq.last_sigma() == kAcqSigmaFloor);
}
