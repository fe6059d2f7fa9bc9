#include "logbo/gp.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "logbo/acq_opt.hpp"
#include "logbo/rng.hpp"

namespace logbo {

namespace {

constexpr double kSqrt5 = 2.23606797749979;
constexpr double kSigmaFloor = 1e-12;

// ARD-scaled Euclidean distance.
double scaled_dist(const Vec& a, const Vec& b, const Vec& ls) {
  double s = 0.0;
  for (Eigen::Index t = 0; t < a.size(); ++t) {
    const double u = (a[t] - b[t]) / ls[t];
    s += u * u;
  }
  return std::sqrt(s);
}

double matern52(double r, double sf2) {
  const double sr = kSqrt5 * r;
  return sf2 * (1.0 + sr + sr * sr / 3.0) * std::exp(-sr);
}

// Common factor of the kernel's input derivatives:
// d k / d a_t = -E(r) (a_t - b_t) / ls_t^2 with E = sf2 e^{-sqrt5 r}(5/3)(1+sqrt5 r).
double matern52_efac(double r, double sf2) {
  return sf2 * std::exp(-kSqrt5 * r) * (5.0 / 3.0) * (1.0 + kSqrt5 * r);
}

Mat kernel_matrix(const Mat& A, const Mat& B, const GpHyperparams& hp) {
  Mat K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      K(i, j) = matern52(scaled_dist(A.row(i), B.row(j), hp.lengthscales), hp.signal_variance);
  return K;
}

// Cholesky with an escalating jitter ladder relative to the mean diagonal.
std::pair<Eigen::LLT<Mat>, double> chol_with_jitter(const Mat& S) {
  const Eigen::Index n = S.rows();
  double scale = S.diagonal().cwiseAbs().mean();
  if (!(scale > 0.0)) scale = 1.0;
  Eigen::LLT<Mat> llt(S);
  if (llt.info() == Eigen::Success) return {llt, 0.0};
  for (double j = 1e-8; j <= 1.0001e-4; j *= 10.0) {
    Mat Sj = S + j * scale * Mat::Identity(n, n);
    llt.compute(Sj);
    if (llt.info() == Eigen::Success) return {llt, j * scale};
  }
  throw std::runtime_error("Cholesky failed after jitter escalation");
}

}  // namespace

DataSet DataSet::standardized(const Mat& inputs_unit, const Mat& outputs_raw) {
  if (inputs_unit.rows() != outputs_raw.rows())
    throw std::invalid_argument("DataSet: row mismatch");
  DataSet ds;
  ds.inputs = inputs_unit;
  ds.outputs.resize(outputs_raw.rows(), outputs_raw.cols());
  const Eigen::Index n = outputs_raw.rows();
  for (Eigen::Index m = 0; m < outputs_raw.cols(); ++m) {
    Standardizer sc;
    sc.mean = outputs_raw.col(m).mean();
    if (n > 1) {
      const double ss = (outputs_raw.col(m).array() - sc.mean).square().sum();
      sc.std = std::sqrt(ss / static_cast<double>(n - 1));
    }
    if (!(sc.std > 0.0)) sc.std = 1.0;  // constant outputs
    for (Eigen::Index i = 0; i < n; ++i) ds.outputs(i, m) = sc.apply(outputs_raw(i, m));
    ds.scalers.push_back(sc);
  }
  return ds;
}

double kernel_matern52_ard(const Vec& a, const Vec& b, const GpHyperparams& hp) {
  if (a.size() != b.size() || a.size() != hp.lengthscales.size())
    throw std::invalid_argument("kernel_matern52_ard: dimension mismatch");
  return matern52(scaled_dist(a, b, hp.lengthscales), hp.signal_variance);
}

GpModel::GpModel(Mat X, Vec y, GpHyperparams hp)
    : X_(std::move(X)), y_(std::move(y)), hp_(std::move(hp)), dim_(static_cast<int>(X_.cols())) {
  if (X_.rows() != y_.size()) throw std::invalid_argument("GpModel: X/y size mismatch");
  const Eigen::Index n = X_.rows();
  if (n > 0) {
    Mat K = kernel_matrix(X_, X_, hp_);
    K.diagonal().array() += hp_.noise_variance;
    auto [llt, jit] = chol_with_jitter(K);
    (void)jit;
    llt_ = llt;
    alpha_ = llt_.solve((y_.array() - hp_.mean_constant).matrix());
  }
}

double GpModel::log_marginal_likelihood(const Mat& X, const Vec& y, const GpHyperparams& hp,
                                        Vec* grad_theta) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n < 1) throw std::invalid_argument("log_marginal_likelihood: needs n >= 1");

  // Kernel part and the E factor reused by the lengthscale derivatives.
  Mat Kf(n, n), E(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double r = scaled_dist(X.row(i), X.row(j), hp.lengthscales);
      Kf(i, j) = Kf(j, i) = matern52(r, hp.signal_variance);
      E(i, j) = E(j, i) = matern52_efac(r, hp.signal_variance);
    }
  Mat K = Kf;
  K.diagonal().array() += hp.noise_variance;
  auto [llt, jit] = chol_with_jitter(K);

  (void)jit;
  Vec resid = (y.array() - hp.mean_constant).matrix();
  Vec alpha = llt.solve(resid);
  const double logdet = llt.matrixLLT().diagonal().array().log().sum();
  const double lml =
      -0.5 * resid.dot(alpha) - logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);

  if (grad_theta) {
    grad_theta->resize(d + 3);
    Mat A = llt.solve(Mat::Identity(n, n));
    Mat B = alpha * alpha.transpose() - A;  // dLML/dtheta = 0.5 sum(B .* dK)
    for (Eigen::Index t = 0; t < d; ++t) {
      double acc = 0.0;
      const double ls2 = hp.lengthscales[t] * hp.lengthscales[t];
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double u = X(i, t) - X(j, t);
          acc += B(i, j) * E(i, j) * (u * u / ls2);
        }
      (*grad_theta)[t] = 0.5 * acc;
    }
    (*grad_theta)[d] = 0.5 * B.cwiseProduct(Kf).sum();
    (*grad_theta)[d + 1] = 0.5 * hp.noise_variance * B.trace();
    (*grad_theta)[d + 2] = alpha.sum();
  }
  return lml;
}

GpModel GpModel::fit(const Mat& X, const Vec& y, const FitOptions& opts, uint64_t seed) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (n < 2) throw std::invalid_argument("GpModel::fit: needs n >= 2");

  const bool fit_noise = !opts.fix_noise_to_floor;
  const int dim = d + 1 + (fit_noise ? 1 : 0) + 1;  // log ls, log sf2, [log sn2], mean

  Vec lo(dim), hi(dim);
  lo.head(d).setConstant(std::log(opts.ls_lower));
  hi.head(d).setConstant(std::log(opts.ls_upper));
  lo[d] = std::log(1e-6);
  hi[d] = std::log(100.0);
  int idx = d + 1;
  if (fit_noise) {
    lo[idx] = std::log(opts.noise_floor);
    hi[idx] = std::log(10.0);
    ++idx;
  }
  lo[idx] = -10.0;
  hi[idx] = 10.0;

  auto unpack = [&](const Vec& th) {
    GpHyperparams hp;
    hp.lengthscales = th.head(d).array().exp();
    hp.signal_variance = std::exp(th[d]);
    int k = d + 1;
    hp.noise_variance = fit_noise ? std::exp(th[k]) : opts.noise_floor;
    if (fit_noise) ++k;
    hp.mean_constant = th[k];
    return hp;
  };

  BoxObjective obj = [&](const Vec& th, Vec* g) {
    GpHyperparams hp = unpack(th);
    Vec full_grad;
    const double lml = log_marginal_likelihood(X, y, hp, g ? &full_grad : nullptr);
    if (g) {
      g->resize(dim);
      g->head(d) = full_grad.head(d);
      (*g)[d] = full_grad[d];
      int k = d + 1;
      if (fit_noise) {
        (*g)[k] = full_grad[d + 1];
        ++k;
      }
      (*g)[k] = full_grad[d + 2];
    }
    return lml;
  };

  Rng rng(mix_seed(seed, 0x6f17));
  double best = -std::numeric_limits<double>::infinity();
  Vec best_th;
  for (int r = 0; r < opts.restarts; ++r) {
    Vec th0(dim);
    for (int k = 0; k < dim; ++k) th0[k] = rng.uniform(lo[k], hi[k]);
    th0[dim - 1] = rng.uniform(-1.0, 1.0);  // mean of standardized data
    try {
      double val;
      Vec th = lbfgsb_local(obj, th0, lo, hi, opts.max_iters, 1e-7, &val);
      if (val > best) {
        best = val;
        best_th = th;
      }
    } catch (const std::runtime_error&) {
      continue;  // non-PSD or non-finite start; other restarts may succeed
    }
  }
  if (!best_th.size()) throw std::runtime_error("GpModel::fit: all restarts failed");
  return GpModel(X, y, unpack(best_th));
}

void GpModel::predict(const Vec& x, double& mu, double& sigma) const {
  const Eigen::Index n = X_.rows();
  if (n == 0) {
    mu = hp_.mean_constant;
    sigma = std::sqrt(hp_.signal_variance);
    return;
  }
  Vec k(n);
  for (Eigen::Index i = 0; i < n; ++i)
    k[i] = matern52(scaled_dist(x, X_.row(i), hp_.lengthscales), hp_.signal_variance);
  mu = hp_.mean_constant + k.dot(alpha_);
  Vec v = llt_.matrixL().solve(k);
  const double s2 = hp_.signal_variance - v.squaredNorm();
  sigma = std::sqrt(std::max(s2, 0.0));
}

void GpModel::predict_grad(const Vec& x, double& mu, double& sigma, Vec& dmu, Vec& dsigma) const {
  const Eigen::Index n = X_.rows();
  const Eigen::Index d = dim_;
  if (n == 0) {
    mu = hp_.mean_constant;
    sigma = std::sqrt(hp_.signal_variance);
    dmu = Vec::Zero(d);
    dsigma = Vec::Zero(d);
    return;
  }
  Vec k(n);
  Mat dk(n, d);  // dk(i, t) = d k(x, X_i) / d x_t
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = scaled_dist(x, X_.row(i), hp_.lengthscales);
    k[i] = matern52(r, hp_.signal_variance);
    const double e = matern52_efac(r, hp_.signal_variance);
    for (Eigen::Index t = 0; t < d; ++t) {
      const double ls2 = hp_.lengthscales[t] * hp_.lengthscales[t];
      dk(i, t) = -e * (x[t] - X_(i, t)) / ls2;
    }
  }
  mu = hp_.mean_constant + k.dot(alpha_);
  dmu = dk.transpose() * alpha_;
  Vec w = llt_.solve(k);
  const double s2 = std::max(hp_.signal_variance - k.dot(w), 0.0);
  sigma = std::sqrt(s2);
  Vec ds2 = -2.0 * dk.transpose() * w;
  // below the floor, report the derivative of the floored sigma
  const double sig_eff = std::max(sigma, kSigmaFloor);
  dsigma = ds2 / (2.0 * sig_eff);
}

PosteriorGaussian GpModel::posterior(const Mat& P) const {
  const Eigen::Index n = X_.rows();
  const Eigen::Index Q = P.rows();
  PosteriorGaussian post;
  Mat Kpp = kernel_matrix(P, P, hp_);
  if (n == 0) {
    post.mean = Vec::Constant(Q, hp_.mean_constant);
    post.cov = Kpp;
  } else {
    Mat Kxp = kernel_matrix(X_, P, hp_);
    post.mean = Vec::Constant(Q, hp_.mean_constant) + Kxp.transpose() * alpha_;
    Mat V = llt_.matrixL().solve(Kxp);
    post.cov = Kpp - V.transpose() * V;
  }
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();  // enforce symmetry
  auto [llt, jit] = chol_with_jitter(post.cov);
  post.chol = llt.matrixL();
  post.jitter = jit;
  return post;
}

void GpModel::posterior_coord_grad(const Mat& P, const PosteriorGaussian&, int row, int t,
                                   Vec& dmean, Mat& dcov) const {
  const Eigen::Index n = X_.rows();
  const Eigen::Index Q = P.rows();
  dmean = Vec::Zero(Q);
  dcov = Mat::Zero(Q, Q);
  const Vec xr = P.row(row);
  const double ls2 = hp_.lengthscales[t] * hp_.lengthscales[t];

  // derivative of k(P_row, .) w.r.t. coordinate t of P_row
  auto dk1 = [&](const Vec& b) {
    const double r = scaled_dist(xr, b, hp_.lengthscales);
    return -matern52_efac(r, hp_.signal_variance) * (xr[t] - b[t]) / ls2;
  };

  Vec terms = Vec::Zero(Q);
  if (n > 0) {
    Vec dk_row_X(n);
    for (Eigen::Index i = 0; i < n; ++i) dk_row_X[i] = dk1(X_.row(i));
    Vec s = llt_.solve(dk_row_X);
    Mat Kxp = kernel_matrix(X_, P, hp_);
    terms = Kxp.transpose() * s;
    dmean[row] = dk_row_X.dot(alpha_);
  }
  for (Eigen::Index b = 0; b < Q; ++b) {
    if (b == static_cast<Eigen::Index>(row)) {
      dcov(row, row) = -2.0 * terms[row];
    } else {
      const double v = dk1(P.row(b)) - terms[b];
      dcov(row, b) = v;
      dcov(b, row) = v;
    }
  }
}

JointDraws draw_joint(const GpModel& model, const Mat& prefix, const Mat& X, const Mat& base) {
  const Eigen::Index p = prefix.rows();
  if (base.cols() != p + X.rows())
    throw std::invalid_argument("draw_joint: base width must equal prefix + batch rows");
  JointDraws d;
  d.points.resize(p + X.rows(), model.dim());
  if (p > 0) d.points.topRows(p) = prefix;
  d.points.bottomRows(X.rows()) = X;
  d.post = model.posterior(d.points);
  d.samples = base * d.post.chol.transpose();
  d.samples.rowwise() += d.post.mean.transpose();
  return d;
}

void backprop_joint(const GpModel& model, const JointDraws& draws, const Mat& base,
                    const Mat& dF_cand, Mat& gx) {
  const int Q = static_cast<int>(draws.points.rows());
  const int qq = static_cast<int>(dF_cand.cols());
  const int p = Q - qq;
  const int d = model.dim();
  Mat dF = Mat::Zero(base.rows(), Q);
  dF.rightCols(qq) = dF_cand;
  const Vec a = dF.colwise().sum().transpose();
  const Mat C = dF.transpose() * base;  // sum_i dF_i eps_i^T

  const auto L = draws.post.chol.triangularView<Eigen::Lower>();
  Vec dmean;
  Mat dcov;
  for (int j = 0; j < qq; ++j) {
    for (int t = 0; t < d; ++t) {
      model.posterior_coord_grad(draws.points, draws.post, p + j, t, dmean, dcov);
      // dL = L Phi(L^-1 dcov L^-T), Phi = tril with halved diagonal
      Mat M = L.solve(dcov);
      M = L.solve(M.transpose()).transpose();
      Mat phi = Mat::Zero(Q, Q);
      phi.triangularView<Eigen::StrictlyLower>() = M.triangularView<Eigen::StrictlyLower>();
      phi.diagonal() = 0.5 * M.diagonal();
      Mat dL = draws.post.chol * phi;
      gx(j, t) += a.dot(dmean) + dL.cwiseProduct(C).sum();
    }
  }
}

// ---- serialization ----

std::string GpModel::to_json(const Standardizer& scaler, bool include_data) const {
  nlohmann::json j;
  j["dim"] = dim_;
  j["hyperparams"] = {{"lengthscales", std::vector<double>(hp_.lengthscales.begin(), hp_.lengthscales.end())},
                      {"signal_variance", hp_.signal_variance},
                      {"noise_variance", hp_.noise_variance},
                      {"mean_constant", hp_.mean_constant}};
  j["standardizer"] = {{"mean", scaler.mean}, {"std", scaler.std}};
  if (include_data) {
    std::vector<std::vector<double>> xs(X_.rows());
    for (Eigen::Index i = 0; i < X_.rows(); ++i)
      xs[i].assign(X_.row(i).begin(), X_.row(i).end());
    j["data"] = {{"inputs", xs}, {"outputs", std::vector<double>(y_.begin(), y_.end())}};
  }
  return j.dump(2);
}

GpModel GpModel::from_json(const std::string& text, Standardizer* scaler) {
  nlohmann::json j = nlohmann::json::parse(text);
  const int d = j.at("dim").get<int>();
  GpHyperparams hp;
  const auto& jh = j.at("hyperparams");
  std::vector<double> ls = jh.at("lengthscales").get<std::vector<double>>();
  hp.lengthscales = Eigen::Map<Vec>(ls.data(), ls.size());
  hp.signal_variance = jh.at("signal_variance").get<double>();
  hp.noise_variance = jh.at("noise_variance").get<double>();
  hp.mean_constant = jh.at("mean_constant").get<double>();
  if (scaler) {
    scaler->mean = j.at("standardizer").at("mean").get<double>();
    scaler->std = j.at("standardizer").at("std").get<double>();
  }
  Mat X(0, d);
  Vec y(0);
  if (j.contains("data")) {
    const auto xs = j["data"].at("inputs").get<std::vector<std::vector<double>>>();
    const auto ys = j["data"].at("outputs").get<std::vector<double>>();
    X.resize(xs.size(), d);
    for (size_t i = 0; i < xs.size(); ++i)
      X.row(i) = Eigen::Map<const Vec>(xs[i].data(), d);
    y = Eigen::Map<const Vec>(ys.data(), ys.size());
  }
  return GpModel(std::move(X), std::move(y), std::move(hp));
}

}  // namespace logbo
