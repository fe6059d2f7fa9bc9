#include "logbo/acq_mohv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "logbo/rng.hpp"

namespace logbo {

namespace {

constexpr double kLogHviFloor = -745.0;  // about log of the smallest normal double

Mat draw_base(uint64_t seed, uint64_t tag, int rows, int cols) {
  Rng rng(mix_seed(seed, tag));
  return rng.normal_matrix(rows, cols);
}

}  // namespace

Mat pareto_filter(const Mat& Y) {
  if (Y.cols() != 2) throw std::invalid_argument("pareto_filter: M = 2 only");
  const int n = static_cast<int>(Y.rows());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (Y(a, 0) != Y(b, 0)) return Y(a, 0) > Y(b, 0);
    return Y(a, 1) > Y(b, 1);
  });
  std::vector<int> keep;
  double best_f2 = -std::numeric_limits<double>::infinity();
  double best_f1 = std::numeric_limits<double>::infinity();
  for (int i : idx) {
    const double f1 = Y(i, 0), f2 = Y(i, 1);
    // kept iff not dominated by any previously kept point
    if (f2 > best_f2 || (f2 == best_f2 && f1 == best_f1)) {
      keep.push_back(i);
      best_f2 = std::max(best_f2, f2);
      best_f1 = f1;
    }
  }
  Mat out(keep.size(), 2);
  for (size_t i = 0; i < keep.size(); ++i) out.row(i) = Y.row(keep[i]);
  return out;
}

ParetoFrontier ParetoFrontier::build(const Mat& Y, const Vec& ref) {
  if (ref.size() != 2) throw std::invalid_argument("ParetoFrontier: M = 2 only");
  ParetoFrontier f;
  f.ref = ref;
  if (Y.rows() == 0) {
    f.points = Mat(0, 2);
    return f;
  }
  Mat nd = pareto_filter(Y);
  std::vector<int> keep;
  for (int i = 0; i < nd.rows(); ++i)
    if (nd(i, 0) > ref[0] && nd(i, 1) > ref[1]) keep.push_back(i);
  f.points.resize(keep.size(), 2);
  for (size_t i = 0; i < keep.size(); ++i) f.points.row(i) = nd.row(keep[i]);
  // sort by first objective descending (second ascending on the frontier)
  std::vector<int> idx(keep.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return f.points(a, 0) > f.points(b, 0); });
  Mat sorted(f.points.rows(), 2);
  for (size_t i = 0; i < idx.size(); ++i) sorted.row(i) = f.points.row(idx[i]);
  f.points = sorted;
  return f;
}

double hypervolume(const ParetoFrontier& front) {
  const Mat& P = front.points;
  const Vec& r = front.ref;
  double hv = 0.0;
  for (int i = 0; i < P.rows(); ++i) {
    const double next_f1 = (i + 1 < P.rows()) ? P(i + 1, 0) : r[0];
    hv += (P(i, 0) - next_f1) * (P(i, 1) - r[1]);
  }
  return hv;
}

double hypervolume(const Mat& Y, const Vec& ref) {
  return hypervolume(ParetoFrontier::build(Y, ref));
}

BoxDecomposition BoxDecomposition::build(const ParetoFrontier& front, const Vec& upper_bound) {
  const Mat& P = front.points;
  const Vec& r = front.ref;
  const int n = static_cast<int>(P.rows());
  BoxDecomposition d;
  d.lower.resize(n + 1, 2);
  d.upper.resize(n + 1, 2);
  // vertical slabs of the staircase, swept in f1 from the bound down to r
  for (int k = 0; k <= n; ++k) {
    const double f1_hi = (k == 0) ? upper_bound[0] : P(k - 1, 0);
    const double f1_lo = (k == n) ? r[0] : P(k, 0);
    const double f2_lo = (k == 0) ? r[1] : P(k - 1, 1);
    d.lower.row(k) << f1_lo, f2_lo;
    d.upper.row(k) << f1_hi, upper_bound[1];
  }
  return d;
}

double hvi_inclusion_exclusion(const Mat& Ybatch, const BoxDecomposition& decomp) {
  const int q = static_cast<int>(Ybatch.rows());
  if (q > 10) throw std::invalid_argument("hvi_inclusion_exclusion: q > 10 refused");
  if (Ybatch.cols() != 2) throw std::invalid_argument("hvi_inclusion_exclusion: M = 2 only");
  double total = 0.0;
  for (int k = 0; k < decomp.size(); ++k) {
    const double u0 = decomp.upper(k, 0), u1 = decomp.upper(k, 1);
    const double l0 = decomp.lower(k, 0), l1 = decomp.lower(k, 1);
    for (unsigned mask = 1; mask < (1u << q); ++mask) {
      double z0 = u0, z1 = u1;
      for (int s = 0; s < q; ++s) {
        if (mask & (1u << s)) {
          z0 = std::min(z0, Ybatch(s, 0));
          z1 = std::min(z1, Ybatch(s, 1));
        }
      }
      const double prod = std::max(z0 - l0, 0.0) * std::max(z1 - l1, 0.0);
      total += (__builtin_popcount(mask) % 2 == 1) ? prod : -prod;
    }
  }
  return total;
}

Vec objective_upper_bound(const Mat& Y_observed, const Vec& ref) {
  Vec ub(2);
  for (int m = 0; m < 2; ++m) {
    const double hi = Y_observed.rows() > 0 ? Y_observed.col(m).maxCoeff() : ref[m] + 1.0;
    const double range = std::max(hi - ref[m], 1e-8);
    ub[m] = hi + 0.1 * range;
  }
  return ub;
}

// ---- hard qEHVI ----

QEhviAcquisition::QEhviAcquisition(std::vector<std::shared_ptr<const GpModel>> models,
                                   ParetoFrontier front, BoxDecomposition decomp, int q,
                                   int num_draws, uint64_t seed, Mat pending)
    : models_(std::move(models)), front_(std::move(front)), decomp_(std::move(decomp)), q_(q),
      num_draws_(num_draws > 0 ? num_draws : 128), seed_(seed), pending_(std::move(pending)) {
  if (models_.size() != 2) throw std::invalid_argument("qehvi: two objective models required");
  if (q_ < 1) throw std::invalid_argument("qehvi: q >= 1 required");
  const int cols = static_cast<int>(pending_.rows()) + q_;
  for (size_t m = 0; m < models_.size(); ++m)
    base_.push_back(draw_base(seed_, 0xe0 + m, num_draws_, cols));
}

std::unique_ptr<Acquisition> QEhviAcquisition::with_pending(const Mat& pending) const {
  Mat merged(pending_.rows() + pending.rows(), dim());
  if (pending_.rows() > 0) merged.topRows(pending_.rows()) = pending_;
  if (pending.rows() > 0) merged.bottomRows(pending.rows()) = pending;
  return std::make_unique<QEhviAcquisition>(models_, front_, decomp_, 1, num_draws_, seed_,
                                            std::move(merged));
}


double QEhviAcquisition::eval(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qehvi: batch size mismatch");
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

double QEhviAcquisition::eval_impl(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qehvi: batch size mismatch");
  const int N = num_draws_;
  const int Q = static_cast<int>(base_[0].cols());
  const int p = Q - q_;
  if (Q > 10) throw std::invalid_argument("qehvi: batch plus pending > 10 refused");

  JointDraws d0 = draw_joint(*models_[0], pending_, X, base_[0]);
  JointDraws d1 = draw_joint(*models_[1], pending_, X, base_[1]);

  double acc = 0.0;
  Mat dF0 = grad ? Mat::Zero(N, q_) : Mat();
  Mat dF1 = grad ? Mat::Zero(N, q_) : Mat();

  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < decomp_.size(); ++k) {
      const double u[2] = {decomp_.upper(k, 0), decomp_.upper(k, 1)};
      const double l[2] = {decomp_.lower(k, 0), decomp_.lower(k, 1)};
      for (unsigned mask = 1; mask < (1u << Q); ++mask) {
        double z[2] = {u[0], u[1]};
        int argmin[2] = {-1, -1};  // -1: the box upper bound
        for (int s = 0; s < Q; ++s) {
          if (!(mask & (1u << s))) continue;
          const double y0 = d0.samples(i, s), y1 = d1.samples(i, s);
          if (y0 < z[0]) { z[0] = y0; argmin[0] = s; }
          if (y1 < z[1]) { z[1] = y1; argmin[1] = s; }
        }
        const double r0 = z[0] - l[0], r1 = z[1] - l[1];
        if (r0 <= 0.0 || r1 <= 0.0) continue;
        const double sign = (__builtin_popcount(mask) % 2 == 1) ? 1.0 : -1.0;
        acc += sign * r0 * r1;
        if (grad) {
          if (argmin[0] >= p) dF0(i, argmin[0] - p) += sign * r1 / N;
          if (argmin[1] >= p) dF1(i, argmin[1] - p) += sign * r0 / N;
        }
      }
    }
  }
  if (grad) {
    grad->setZero();
    backprop_joint(*models_[0], d0, base_[0], dF0, *grad);
    backprop_joint(*models_[1], d1, base_[1], dF1, *grad);
  }
  return acc / N;
}

// ---- qLogEHVI ----

QLogEhviAcquisition::QLogEhviAcquisition(std::vector<std::shared_ptr<const GpModel>> models,
                                         ParetoFrontier front, BoxDecomposition decomp,
                                         Temperatures temps, int q, int num_draws, uint64_t seed,
                                         bool expected_log_hv, Mat pending)
    : models_(std::move(models)), front_(std::move(front)), decomp_(std::move(decomp)),
      temps_(temps), q_(q), num_draws_(num_draws > 0 ? num_draws : 128), seed_(seed),
      expected_log_hv_(expected_log_hv), pending_(std::move(pending)) {
  if (models_.size() != 2) throw std::invalid_argument("qlogehvi: two objective models required");
  if (q_ < 1) throw std::invalid_argument("qlogehvi: q >= 1 required");
  temps_.validate();
  const int cols = static_cast<int>(pending_.rows()) + q_;
  for (size_t m = 0; m < models_.size(); ++m)
    base_.push_back(draw_base(seed_, 0xe0 + m, num_draws_, cols));
}

std::unique_ptr<Acquisition> QLogEhviAcquisition::with_pending(const Mat& pending) const {
  Mat merged(pending_.rows() + pending.rows(), dim());
  if (pending_.rows() > 0) merged.topRows(pending_.rows()) = pending_;
  if (pending.rows() > 0) merged.bottomRows(pending.rows()) = pending;
  return std::make_unique<QLogEhviAcquisition>(models_, front_, decomp_, temps_, 1, num_draws_,
                                               seed_, expected_log_hv_, std::move(merged));
}


double QLogEhviAcquisition::eval(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_) throw std::invalid_argument("qlogehvi: batch size mismatch");
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

double QLogEhviAcquisition::eval_impl(const Mat& X, Mat* grad) const {
  if (static_cast<int>(X.rows()) != q_)
    throw std::invalid_argument("qlogehvi: batch size mismatch");
  const int N = num_draws_;
  const int Q = static_cast<int>(base_[0].cols());
  const int p = Q - q_;
  if (Q > 10) throw std::invalid_argument("qlogehvi: batch plus pending > 10 refused");
  const int K = decomp_.size();
  const unsigned nmask = (1u << Q) - 1;

  JointDraws d[2] = {draw_joint(*models_[0], pending_, X, base_[0]),
                     draw_joint(*models_[1], pending_, X, base_[1])};

  // count samples clipped by the decomposition's upper bound
  long clipped = 0;
  const double ub0 = decomp_.upper.col(0).maxCoeff();
  const double ub1 = decomp_.upper.col(1).maxCoeff();
  for (int i = 0; i < N; ++i)
    for (int s = p; s < Q; ++s)
      if (d[0].samples(i, s) > ub0 || d[1].samples(i, s) > ub1) ++clipped;
  clipped_samples_ += clipped;

  Vec log_hvi(N);
  // per draw: dlog_hvi / dsamples, for both objectives
  Mat dhvi[2];
  if (grad) {
    dhvi[0] = Mat::Zero(N, Q);
    dhvi[1] = Mat::Zero(N, Q);
  }

  const int nterms = K * static_cast<int>(nmask);
  Vec term_log(nterms);
  std::vector<signed char> term_sign(nterms);
  Mat term_grad[2];  // d(term_log)/d(samples of objective m), per term row
  if (grad) {
    term_grad[0] = Mat(nterms, Q);
    term_grad[1] = Mat(nterms, Q);
  }
  Vec vals, gmin;

  long clamped = 0;
  for (int i = 0; i < N; ++i) {
    int tcount = 0;
    for (int k = 0; k < K; ++k) {
      for (unsigned mask = 1; mask <= nmask; ++mask) {
        const int sz = __builtin_popcount(mask);
        double lt = 0.0;
        if (grad) {
          term_grad[0].row(tcount).setZero();
          term_grad[1].row(tcount).setZero();
        }
        for (int m = 0; m < 2; ++m) {
          vals.resize(sz + 1);
          int c = 0;
          vals[c++] = decomp_.upper(k, m);
          for (int s = 0; s < Q; ++s)
            if (mask & (1u << s)) vals[c++] = d[m].samples(i, s);
          const double zmin = fatmin(vals, temps_.tau_max);
          const double arg = zmin - decomp_.lower(k, m);
          lt += log_fatplus(arg, temps_.tau_0, FatAlpha());
          if (grad) {
            const double dlf = dlog_fatplus(arg, temps_.tau_0, FatAlpha());
            gmin = fatmin_grad(vals, temps_.tau_max);
            int cc = 1;
            for (int s = 0; s < Q; ++s)
              if (mask & (1u << s)) term_grad[m](tcount, s) = dlf * gmin[cc++];
          }
        }
        term_log[tcount] = lt;
        term_sign[tcount] = (sz % 2 == 1) ? 1 : -1;
        ++tcount;
      }
    }
    // combine positive and negative components
    double max_pos = -std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < tcount; ++t)
      (term_sign[t] > 0 ? max_pos : max_neg) = std::max(term_sign[t] > 0 ? max_pos : max_neg,
                                                        term_log[t]);
    double sum_pos = 0.0, sum_neg = 0.0;
    for (int t = 0; t < tcount; ++t) {
      if (term_sign[t] > 0) sum_pos += std::exp(term_log[t] - max_pos);
      else sum_neg += std::exp(term_log[t] - max_neg);
    }
    const double log_pos = max_pos + std::log(sum_pos);
    const double log_neg = (sum_neg > 0.0) ? max_neg + std::log(sum_neg)
                                           : -std::numeric_limits<double>::infinity();
    if (!(log_pos > log_neg)) {
      log_hvi[i] = kLogHviFloor;  // pathological draw, zero gradient contribution
      ++clamped;
      continue;
    }
    const double lh = (log_neg == -std::numeric_limits<double>::infinity())
                          ? log_pos
                          : logdiffexp(log_pos, log_neg);
    log_hvi[i] = lh;
    if (grad) {
      const double wp = std::exp(log_pos - lh);
      const double wn = (log_neg == -std::numeric_limits<double>::infinity())
                            ? 0.0
                            : std::exp(log_neg - lh);
      for (int t = 0; t < tcount; ++t) {
        const double wt = (term_sign[t] > 0)
                              ? wp * std::exp(term_log[t] - log_pos)
                              : wn * std::exp(term_log[t] - log_neg);
        const double coeff = (term_sign[t] > 0) ? wt : -wt;
        dhvi[0].row(i) += coeff * term_grad[0].row(t);
        dhvi[1].row(i) += coeff * term_grad[1].row(t);
      }
    }
  }
  clamped_draws_ += clamped;

  double value;
  Vec wi(N);
  if (expected_log_hv_) {
    value = log_hvi.mean();
    wi.setConstant(1.0 / N);
  } else {
    value = logsumexp(log_hvi) - std::log(static_cast<double>(N));
    wi = logsumexp_grad(log_hvi);
  }
  if (grad) {
    grad->setZero();
    for (int m = 0; m < 2; ++m) {
      Mat dF = dhvi[m].rightCols(q_);
      for (int i = 0; i < N; ++i) dF.row(i) *= wi[i];
      backprop_joint(*models_[m], d[m], base_[m], dF, *grad);
    }
  }
  return value;
}

}  // namespace logbo
