#include "logbo/acq_mc.hpp"

#include <cmath>

#include "logbo/rng.hpp"

namespace logbo {

namespace {

Mat draw_base(uint64_t seed, uint64_t tag, int rows, int cols) {
  Rng rng(mix_seed(seed, tag));
  return rng.normal_matrix(rows, cols);
}

// Smoothed log-improvement and its derivative w.r.t. the sample value.
double log_improvement(double z, const Temperatures& t, const McOptions& o, double* dz) {
  if (o.fat) {
    if (dz) *dz = dlog_fatplus(z, t.tau_0, o.alpha);
    return log_fatplus(z, t.tau_0, o.alpha);
  }
  if (dz) *dz = dlogsoftplus(z, t.tau_0);
  return logsoftplus(z, t.tau_0);
}

// Log of the smooth feasibility indicator for slack = threshold - xi,
// and its derivative w.r.t. the sample value xi.
double log_indicator(double xi, double threshold, const Temperatures& t, const McOptions& o,
                     double* dxi) {
  const double slack = threshold - xi;
  if (o.fat) {
    if (dxi) *dxi = -dlog_fatsigmoid(slack, t.tau_cons);
    return log_fatsigmoid(slack, t.tau_cons);
  }
  // canonical: log sigmoid(slack / tau) = -softplus(-slack / tau)
  const double u = -slack / t.tau_cons;
  if (dxi) {
    const double sig = (u > 0.0) ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u - softplus(u));
    *dxi = -sig / t.tau_cons;
  }
  return -softplus(u);
}

}  // namespace

int default_num_draws(int q) { return q >= 16 ? 512 : 128; }

// ---- hard qEI ----

QeiMcAcquisition::QeiMcAcquisition(std::shared_ptr<const GpModel> model, IncumbentState inc, int q,
                                   McOptions opts, uint64_t seed, Mat pending)
    : model_(std::move(model)), inc_(inc), q_(q), opts_(opts), seed_(seed),
      pending_(std::move(pending)) {
  if (q_ < 1) throw std::invalid_argument("qei: q >= 1 required");
  const int n = opts_.num_draws > 0 ? opts_.num_draws : default_num_draws(q_);
  base_ = draw_base(seed_, 0x71e1, n, static_cast<int>(pending_.rows()) + q_);
}

std::unique_ptr<Acquisition> QeiMcAcquisition::with_pending(const Mat& pending) const {
  Mat merged(pending_.rows() + pending.rows(), dim());
  if (pending_.rows() > 0) merged.topRows(pending_.rows()) = pending_;
  if (pending.rows() > 0) merged.bottomRows(pending.rows()) = pending;
  return std::make_unique<QeiMcAcquisition>(model_, inc_, 1, opts_, seed_, std::move(merged));
}


double QeiMcAcquisition::eval(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qei: batch size mismatch");
  if (q_ == 1) return eval_impl(X, grad);
  const auto order = canonical_batch_order(X);
  Mat Xs(X.rows(), X.cols());
  for (int k = 0; k < q_; ++k) Xs.row(k) = X.row(order[k]);
  if (!grad) return eval_impl(Xs, nullptr);
  Mat gs = Mat::Zero(X.rows(), X.cols());
  const double v = eval_impl(Xs, &gs);
  for (int k = 0; k < q_; ++k) grad->row(order[k]) = gs.row(k);
  return v;
}

double QeiMcAcquisition::eval_impl(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qei: batch size mismatch");
  const JointDraws d = draw_joint(*model_, pending_, X, base_);
  const int N = static_cast<int>(base_.rows());
  const int Q = static_cast<int>(base_.cols());
  const int qtot = Q;  // pending samples also count toward the batch maximum

  double acc = 0.0;
  Mat dF = grad ? Mat::Zero(N, q_) : Mat();
  const int p = Q - q_;
  for (int i = 0; i < N; ++i) {
    double best = 0.0;
    int jbest = -1;
    for (int j = 0; j < qtot; ++j) {
      const double imp = d.samples(i, j) - inc_.y_star;
      if (imp > best) {
        best = imp;
        jbest = j;
      }
    }
    acc += best;
    if (grad && jbest >= p) dF(i, jbest - p) = 1.0 / N;
  }
  if (grad) {
    grad->setZero();
    backprop_joint(*model_, d, base_, dF, *grad);
  }
  return acc / N;
}

// ---- qLogEI / qLogCEI ----

QLogEiAcquisition::QLogEiAcquisition(std::shared_ptr<const GpModel> objective,
                                     std::vector<McConstraint> constraints, IncumbentState inc,
                                     Temperatures temps, int q, McOptions opts, uint64_t seed,
                                     Mat pending)
    : objective_(std::move(objective)), constraints_(std::move(constraints)), inc_(inc),
      temps_(temps), q_(q), opts_(opts), seed_(seed), pending_(std::move(pending)) {
  if (q_ < 1) throw std::invalid_argument("qlogei: q >= 1 required");
  temps_.validate();
  const int n = opts_.num_draws > 0 ? opts_.num_draws : default_num_draws(q_);
  const int cols = static_cast<int>(pending_.rows()) + q_;
  base_ = draw_base(seed_, 0x71e1, n, cols);
  for (size_t k = 0; k < constraints_.size(); ++k)
    con_base_.push_back(draw_base(seed_, 0x100 + k, n, cols));
}

std::unique_ptr<Acquisition> QLogEiAcquisition::with_pending(const Mat& pending) const {
  Mat merged(pending_.rows() + pending.rows(), dim());
  if (pending_.rows() > 0) merged.topRows(pending_.rows()) = pending_;
  if (pending.rows() > 0) merged.bottomRows(pending.rows()) = pending;
  return std::make_unique<QLogEiAcquisition>(objective_, constraints_, inc_, temps_, 1, opts_,
                                             seed_, std::move(merged));
}


double QLogEiAcquisition::eval(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qlogei: batch size mismatch");
  if (q_ == 1) return eval_impl(X, grad);
  const auto order = canonical_batch_order(X);
  Mat Xs(X.rows(), X.cols());
  for (int k = 0; k < q_; ++k) Xs.row(k) = X.row(order[k]);
  if (!grad) return eval_impl(Xs, nullptr);
  Mat gs = Mat::Zero(X.rows(), X.cols());
  const double v = eval_impl(Xs, &gs);
  for (int k = 0; k < q_; ++k) grad->row(order[k]) = gs.row(k);
  return v;
}

double QLogEiAcquisition::eval_impl(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qlogei: batch size mismatch");
  const int N = static_cast<int>(base_.rows());
  const int Q = static_cast<int>(base_.cols());
  const bool use_improvement = inc_.has_feasible || constraints_.empty();

  const JointDraws dobj = draw_joint(*objective_, pending_, X, base_);
  std::vector<JointDraws> dcon;
  dcon.reserve(constraints_.size());
  for (size_t k = 0; k < constraints_.size(); ++k)
    dcon.push_back(draw_joint(*constraints_[k].model, pending_, X, con_base_[k]));

  // per-(draw, point) utilities over all q + pending columns
  Mat a(N, Q);
  Mat da_obj = grad ? Mat(N, Q) : Mat();
  std::vector<Mat> da_con(constraints_.size());
  if (grad)
    for (auto& m : da_con) m = Mat(N, Q);

  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < Q; ++j) {
      double util = 0.0;
      double dz = 0.0;
      if (use_improvement) {
        util = log_improvement(dobj.samples(i, j) - inc_.y_star, temps_, opts_, grad ? &dz : nullptr);
      }
      if (grad) da_obj(i, j) = dz;
      for (size_t k = 0; k < constraints_.size(); ++k) {
        double dxi = 0.0;
        util += log_indicator(dcon[k].samples(i, j), constraints_[k].threshold, temps_, opts_,
                              grad ? &dxi : nullptr);
        if (grad) da_con[k](i, j) = dxi;
      }
      a(i, j) = util;
    }
  }

  // s_i = tau_max * logsumexp_j(a_ij / tau_max); value = logsumexp_i(s_i) - log N
  Vec s(N);
  Mat pj = grad ? Mat(N, Q) : Mat();
  for (int i = 0; i < N; ++i) {
    Vec row = a.row(i).transpose() / temps_.tau_max;
    s[i] = temps_.tau_max * logsumexp(row);
    if (grad) pj.row(i) = logsumexp_grad(row).transpose();
  }
  const double value = logsumexp(s) - std::log(static_cast<double>(N));

  if (grad) {
    grad->setZero();
    const Vec wi = logsumexp_grad(s);
    Mat w = pj;  // dvalue/da_ij = wi_i * pj_ij
    for (int i = 0; i < N; ++i) w.row(i) *= wi[i];
    // gradients only flow to candidate columns
    Mat dF = w.rightCols(q_).cwiseProduct(da_obj.rightCols(q_));
    backprop_joint(*objective_, dobj, base_, dF, *grad);
    for (size_t k = 0; k < constraints_.size(); ++k) {
      Mat dFk = w.rightCols(q_).cwiseProduct(da_con[k].rightCols(q_));
      backprop_joint(*constraints_[k].model, dcon[k], con_base_[k], dFk, *grad);
    }
  }
  return value;
}

// ---- qLogNEI ----

QLogNeiAcquisition::QLogNeiAcquisition(std::shared_ptr<const GpModel> model, Temperatures temps,
                                       int q, McOptions opts, uint64_t seed, Mat pending)
    : model_(std::move(model)), temps_(temps), q_(q), opts_(opts), seed_(seed),
      pending_(std::move(pending)) {
  if (q_ < 1) throw std::invalid_argument("qlognei: q >= 1 required");
  if (model_->num_points() < 1)
    throw std::invalid_argument("qlognei: requires observed designs");
  temps_.validate();
  const int n = opts_.num_draws > 0 ? opts_.num_draws : default_num_draws(q_);
  const int cols = model_->num_points() + static_cast<int>(pending_.rows()) + q_;
  base_ = draw_base(seed_, 0x2e1, n, cols);
}

std::unique_ptr<Acquisition> QLogNeiAcquisition::with_pending(const Mat& pending) const {
  Mat merged(pending_.rows() + pending.rows(), dim());
  if (pending_.rows() > 0) merged.topRows(pending_.rows()) = pending_;
  if (pending.rows() > 0) merged.bottomRows(pending.rows()) = pending;
  return std::make_unique<QLogNeiAcquisition>(model_, temps_, 1, opts_, seed_, std::move(merged));
}


double QLogNeiAcquisition::eval(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qlognei: batch size mismatch");
  if (q_ == 1) return eval_impl(X, grad);
  const auto order = canonical_batch_order(X);
  Mat Xs(X.rows(), X.cols());
  for (int k = 0; k < q_; ++k) Xs.row(k) = X.row(order[k]);
  if (!grad) return eval_impl(Xs, nullptr);
  Mat gs = Mat::Zero(X.rows(), X.cols());
  const double v = eval_impl(Xs, &gs);
  for (int k = 0; k < q_; ++k) grad->row(order[k]) = gs.row(k);
  return v;
}

double QLogNeiAcquisition::eval_impl(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qlognei: batch size mismatch");
  const int nobs = model_->num_points();
  const int N = static_cast<int>(base_.rows());
  const int Q = static_cast<int>(base_.cols());

  Mat prefix(nobs + pending_.rows(), dim());
  prefix.topRows(nobs) = model_->train_inputs();
  if (pending_.rows() > 0) prefix.bottomRows(pending_.rows()) = pending_;

  const JointDraws d = draw_joint(*model_, prefix, X, base_);

  // per-draw incumbent: hard max over the observed-design columns
  Vec ystar = d.samples.leftCols(nobs).rowwise().maxCoeff();

  const int batch_cols = Q - nobs;  // pending + candidates share the batch reduction
  Mat a(N, batch_cols);
  Mat da = grad ? Mat(N, batch_cols) : Mat();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < batch_cols; ++j) {
      double dz = 0.0;
      a(i, j) = log_improvement(d.samples(i, nobs + j) - ystar[i], temps_, opts_,
                                grad ? &dz : nullptr);
      if (grad) da(i, j) = dz;
    }
  }
  Vec s(N);
  Mat pj = grad ? Mat(N, batch_cols) : Mat();
  for (int i = 0; i < N; ++i) {
    Vec row = a.row(i).transpose() / temps_.tau_max;
    s[i] = temps_.tau_max * logsumexp(row);
    if (grad) pj.row(i) = logsumexp_grad(row).transpose();
  }
  const double value = logsumexp(s) - std::log(static_cast<double>(N));

  if (grad) {
    grad->setZero();
    const Vec wi = logsumexp_grad(s);
    Mat w = pj;
    for (int i = 0; i < N; ++i) w.row(i) *= wi[i];
    Mat dF = w.rightCols(q_).cwiseProduct(da.rightCols(q_));
    backprop_joint(*model_, d, base_, dF, *grad);
  }
  return value;
}

}  // namespace logbo
