#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "logbo/gp.hpp"
#include "logbo/rng.hpp"

using namespace logbo;

namespace {

GpHyperparams default_hp(int d) {
  GpHyperparams hp;
  hp.lengthscales = Vec::Constant(d, 0.4);
  hp.signal_variance = 1.3;
  hp.noise_variance = 1e-6;
  hp.mean_constant = 0.1;
  return hp;
}

Mat random_inputs(Rng& rng, int n, int d) { return rng.uniform_matrix(n, d); }

// a smooth deterministic target for fitting tests
double smooth_fn(const Vec& x) {
  return std::sin(3.0 * x[0]) + (x.size() > 1 ? std::cos(2.0 * x[1]) : 0.0);
}

}  // namespace

TEST_CASE("kernel closed form and limits") {
  GpHyperparams hp = default_hp(2);
  Vec a(2), b(2);
  a << 0.3, 0.7;
  b << 0.3, 0.7;
  CHECK(kernel_matern52_ard(a, a, hp) == doctest::Approx(hp.signal_variance).epsilon(1e-15));

  // independent evaluation of the closed form at a fixed configuration
  b << 0.9, 0.2;
  double r2 = 0.0;
  for (int t = 0; t < 2; ++t) {
    const double u = (a[t] - b[t]) / hp.lengthscales[t];
    r2 += u * u;
  }
  const double r = std::sqrt(r2);
  const double expected =
      hp.signal_variance * (1.0 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) *
      std::exp(-std::sqrt(5.0) * r);
  CHECK(kernel_matern52_ard(a, b, hp) == doctest::Approx(expected).epsilon(1e-14));

  // monotone decay toward zero with distance
  double prev = hp.signal_variance;
  for (double dist = 0.5; dist < 40.0; dist *= 1.5) {
    Vec c = a;
    c[0] += dist;
    const double k = kernel_matern52_ard(a, c, hp);
    CHECK(k < prev);
    CHECK(k > 0.0);
    prev = k;
  }
  CHECK(prev < 1e-10);
  Vec bad(3);
  CHECK_THROWS_AS(kernel_matern52_ard(a, bad, hp), std::invalid_argument);
}

TEST_CASE("posterior interpolates noiseless data and reverts to the prior") {
  Rng rng(31);
  const int n = 8, d = 2;
  Mat X = random_inputs(rng, n, d);
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = smooth_fn(X.row(i).transpose());
  GpHyperparams hp0 = default_hp(d);
  hp0.noise_variance = 0.0;  // interpolation regime; jitter ladder handles conditioning
  GpModel m(X, y, hp0);
  for (int i = 0; i < n; ++i) {
    double mu, sigma;
    m.predict(X.row(i).transpose(), mu, sigma);
    CHECK(std::abs(mu - y[i]) < 1e-6);
    CHECK(sigma * sigma < 1e-6);
  }
  // prior with no data
  GpModel prior(Mat(0, d), Vec(0), default_hp(d));
  double mu, sigma;
  prior.predict(Vec::Constant(d, 0.5), mu, sigma);
  CHECK(mu == default_hp(d).mean_constant);
  CHECK(sigma == doctest::Approx(std::sqrt(default_hp(d).signal_variance)).epsilon(1e-15));
}

TEST_CASE("single-point conditional matches the hand formula") {
  GpHyperparams hp = default_hp(1);
  hp.noise_variance = 0.05;
  Mat X(1, 1);
  X << 0.4;
  Vec y(1);
  y << 0.9;
  GpModel m(X, y, hp);
  const Vec x = Vec::Constant(1, 0.6);
  const double kxx0 = kernel_matern52_ard(x, X.row(0).transpose(), hp);
  const double k00 = hp.signal_variance + hp.noise_variance;
  const double mu_ref = hp.mean_constant + kxx0 / k00 * (y[0] - hp.mean_constant);
  const double var_ref = hp.signal_variance - kxx0 * kxx0 / k00;
  double mu, sigma;
  m.predict(x, mu, sigma);
  CHECK(std::abs(mu - mu_ref) < 1e-10);
  CHECK(std::abs(sigma * sigma - var_ref) < 1e-10);
}

TEST_CASE("posterior gradients: symmetry, finite differences, decay") {
  GpHyperparams hp = default_hp(1);
  Mat X(2, 1);
  X << 0.3, 0.7;
  Vec y(2);
  y << 1.0, 1.0;
  GpModel m(X, y, hp);
  double mu, sigma;
  Vec dmu, dsigma;
  m.predict_grad(Vec::Constant(1, 0.5), mu, sigma, dmu, dsigma);
  CHECK(std::abs(dmu[0]) < 1e-10);  // midpoint of symmetric data

  Rng rng(37);
  const int n = 10, d = 3;
  Mat Xr = random_inputs(rng, n, d);
  Vec yr(n);
  for (int i = 0; i < n; ++i) yr[i] = smooth_fn(Xr.row(i).transpose());
  GpModel mr(Xr, yr, default_hp(d));
  for (int rep = 0; rep < 20; ++rep) {
    Vec x(d);
    for (int t = 0; t < d; ++t) x[t] = rng.uniform();
    mr.predict_grad(x, mu, sigma, dmu, dsigma);
    for (int t = 0; t < d; ++t) {
      const double h = 1e-6;
      Vec xp = x, xm = x;
      xp[t] += h;
      xm[t] -= h;
      double mup, sigp, mum, sigm;
      mr.predict(xp, mup, sigp);
      mr.predict(xm, mum, sigm);
      const double fdmu = (mup - mum) / (2 * h);
      const double fdsig = (sigp - sigm) / (2 * h);
      CHECK(std::abs(dmu[t] - fdmu) < 1e-5 * std::max(1.0, std::abs(fdmu)));
      CHECK(std::abs(dsigma[t] - fdsig) < 1e-5 * std::max(1.0, std::abs(fdsig)));
    }
  }
  // far from data the mean gradient decays to zero
  mr.predict_grad(Vec::Constant(d, 40.0), mu, sigma, dmu, dsigma);
  CHECK(dmu.norm() < 1e-10);
}

TEST_CASE("log marginal likelihood gradient matches finite differences") {
  Rng rng(41);
  const int n = 12, d = 2;
  Mat X = random_inputs(rng, n, d);
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = smooth_fn(X.row(i).transpose()) + 0.05 * rng.normal();
  GpHyperparams hp = default_hp(d);
  hp.noise_variance = 0.01;
  Vec g;
  GpModel::log_marginal_likelihood(X, y, hp, &g);
  REQUIRE(g.size() == d + 3);

  auto lml_at = [&](int k, double delta) {
    GpHyperparams h2 = hp;
    if (k < d) h2.lengthscales[k] *= std::exp(delta);
    else if (k == d) h2.signal_variance *= std::exp(delta);
    else if (k == d + 1) h2.noise_variance *= std::exp(delta);
    else h2.mean_constant += delta;
    return GpModel::log_marginal_likelihood(X, y, h2);
  };
  for (int k = 0; k < d + 3; ++k) {
    const double h = 1e-6;
    const double fdg = (lml_at(k, h) - lml_at(k, -h)) / (2 * h);
    CHECK(std::abs(g[k] - fdg) <= 1e-5 * std::max(1.0, std::abs(fdg)));
  }
}

TEST_CASE("fit recovers lengthscales of a known GP draw") {
  const int d = 2;
  GpHyperparams truth = default_hp(d);
  truth.lengthscales << 0.2, 0.6;
  truth.signal_variance = 1.0;
  truth.noise_variance = 1e-6;
  truth.mean_constant = 0.0;
  int ok = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(mix_seed(1234, trial));
    const int n = 48;
    Mat X = random_inputs(rng, n, d);
    // exact draw from the prior via the joint Cholesky
    GpModel prior(Mat(0, d), Vec(0), truth);
    PosteriorGaussian post = prior.posterior(X);
    Vec eps(n);
    for (int i = 0; i < n; ++i) eps[i] = rng.normal();
    Vec y = post.mean + post.chol * eps;
    GpModel fit = GpModel::fit(X, y, FitOptions{}, mix_seed(99, trial));
    bool good = true;
    for (int t = 0; t < d; ++t) {
      const double ratio = fit.hyperparams().lengthscales[t] / truth.lengthscales[t];
      good &= (ratio > 0.5 && ratio < 2.0);
    }
    ok += good;
  }
  CHECK(ok >= 16);  // >= 80% of seeded trials
}

TEST_CASE("fit handles duplicate inputs and constant outputs") {
  Mat X(2, 1);
  X << 0.5, 0.5;
  Vec y(2);
  y << -1.0, 1.0;
  GpModel m = GpModel::fit(X, y, FitOptions{}, 3);
  CHECK(m.hyperparams().noise_variance > 1e-5);  // only noise can explain it

  Mat Xc(6, 1);
  Xc << 0.0, 0.2, 0.4, 0.6, 0.8, 1.0;
  Vec yc = Vec::Constant(6, 2.5);
  GpModel mc = GpModel::fit(Xc, yc, FitOptions{}, 5);
  CHECK(mc.hyperparams().signal_variance < 1e-3);  // shrinks toward the floor
  CHECK(std::abs(mc.hyperparams().mean_constant - 2.5) < 0.05);
}

TEST_CASE("fit is deterministic given data and seed") {
  Rng rng(43);
  Mat X = random_inputs(rng, 10, 2);
  Vec y(10);
  for (int i = 0; i < 10; ++i) y[i] = smooth_fn(X.row(i).transpose());
  GpModel a = GpModel::fit(X, y, FitOptions{}, 77);
  GpModel b = GpModel::fit(X, y, FitOptions{}, 77);
  CHECK(a.hyperparams().lengthscales == b.hyperparams().lengthscales);
  CHECK(a.hyperparams().signal_variance == b.hyperparams().signal_variance);
  CHECK(a.hyperparams().noise_variance == b.hyperparams().noise_variance);
  CHECK(a.hyperparams().mean_constant == b.hyperparams().mean_constant);
}

TEST_CASE("joint posterior is PSD after jitter, including duplicates") {
  Rng rng(47);
  Mat X = random_inputs(rng, 6, 2);
  Vec y(6);
  for (int i = 0; i < 6; ++i) y[i] = smooth_fn(X.row(i).transpose());
  GpModel m(X, y, default_hp(2));
  Mat P(4, 2);
  P.row(0) = X.row(0);
  P.row(1) = X.row(0);  // duplicate rows force degeneracy
  P.row(2) << 0.5, 0.5;
  P.row(3) << 0.25, 0.75;
  PosteriorGaussian post = m.posterior(P);
  Eigen::SelfAdjointEigenSolver<Mat> es(post.cov + post.jitter * Mat::Identity(4, 4));
  CHECK(es.eigenvalues().minCoeff() > -1e-8);
  CHECK(post.chol.allFinite());
}

TEST_CASE("reparameterized sampling: identity, moments, gradients") {
  // identity case: unit covariance, one-hot base
  GpHyperparams hp = default_hp(1);
  GpModel prior(Mat(0, 1), Vec(0), hp);
  Mat P(2, 1);
  P << 0.1, 0.9;
  PosteriorGaussian post = prior.posterior(P);
  // direct check of xi = mean + L eps
  Mat base = Mat::Zero(1, 2);
  base(0, 1) = 1.0;
  JointDraws d = draw_joint(prior, Mat(0, 1), P, base);
  Vec expected = post.mean + post.chol.col(1);
  CHECK((d.samples.row(0).transpose() - expected).norm() < 1e-12);

  // moment check against the posterior
  Rng rng(53);
  Mat Xtr = random_inputs(rng, 6, 1);
  Vec ytr(6);
  for (int i = 0; i < 6; ++i) ytr[i] = smooth_fn(Xtr.row(i).transpose());
  GpModel m(Xtr, ytr, hp);
  PosteriorGaussian post2 = m.posterior(P);
  const int N = 100000;
  Mat base2 = rng.normal_matrix(N, 2);
  JointDraws d2 = draw_joint(m, Mat(0, 1), P, base2);
  Vec mean_hat = d2.samples.colwise().mean().transpose();
  for (int j = 0; j < 2; ++j) {
    const double se = std::sqrt(post2.cov(j, j) / N);
    CHECK(std::abs(mean_hat[j] - post2.mean[j]) < 3.0 * se + 1e-12);
  }
  Mat centered = d2.samples.rowwise() - mean_hat.transpose();
  Mat cov_hat = centered.transpose() * centered / (N - 1);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(std::abs(cov_hat(a, b) - post2.cov(a, b)) < 0.02);

  // gradient of a linear functional of the samples vs finite differences
  const int Ng = 16;
  Mat baseg = rng.normal_matrix(Ng, 2);
  Mat W = rng.normal_matrix(Ng, 2);
  auto value_at = [&](const Mat& Pq) {
    JointDraws dd = draw_joint(m, Mat(0, 1), Pq, baseg);
    return (dd.samples.cwiseProduct(W)).sum();
  };
  JointDraws dg = draw_joint(m, Mat(0, 1), P, baseg);
  Mat gx = Mat::Zero(2, 1);
  backprop_joint(m, dg, baseg, W, gx);
  for (int j = 0; j < 2; ++j) {
    const double h = 1e-6;
    Mat Pp = P, Pm = P;
    Pp(j, 0) += h;
    Pm(j, 0) -= h;
    const double fdg = (value_at(Pp) - value_at(Pm)) / (2 * h);
    CHECK(std::abs(gx(j, 0) - fdg) <= 1e-4 * std::max(1.0, std::abs(fdg)));
  }
}

TEST_CASE("model JSON round trip") {
  Rng rng(59);
  Mat X = random_inputs(rng, 5, 2);
  Vec y(5);
  for (int i = 0; i < 5; ++i) y[i] = smooth_fn(X.row(i).transpose());
  GpModel m(X, y, default_hp(2));
  Standardizer sc{0.25, 1.75};
  const std::string text = m.to_json(sc, true);
  Standardizer sc2;
  GpModel m2 = GpModel::from_json(text, &sc2);
  CHECK(sc2.mean == sc.mean);
  CHECK(sc2.std == sc.std);
  CHECK(m2.num_points() == 5);
  double mu1, s1, mu2, s2;
  const Vec x = Vec::Constant(2, 0.42);
  m.predict(x, mu1, s1);
  m2.predict(x, mu2, s2);
  CHECK(mu1 == mu2);
  CHECK(s1 == s2);
}
