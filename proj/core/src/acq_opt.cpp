#include "logbo/acq_opt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "logbo/rng.hpp"

namespace logbo {

namespace {

Vec project(const Vec& x, const Vec& lo, const Vec& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

Vec lbfgsb_local(const BoxObjective& f, Vec x0, const Vec& lo, const Vec& hi, int max_iters,
                 double grad_tol, double* value_out, int* iters_out, bool* converged_out) {
  constexpr int kHistory = 10;
  constexpr double kArmijo = 1e-4;
  const Eigen::Index n = x0.size();

  Vec x = project(x0, lo, hi);
  Vec g(n);
  double fx = f(x, &g);
  if (!std::isfinite(fx)) throw std::runtime_error("lbfgsb_local: objective non-finite at x0");

  // minimize phi = -f internally
  Vec gphi = -g;
  std::deque<Vec> S, Y;
  std::deque<double> rho;

  int it = 0;
  bool converged = false;
  for (; it < max_iters; ++it) {
    // projected-gradient stationarity check
    const Vec pg = x - project(x - gphi, lo, hi);
    if (pg.lpNorm<Eigen::Infinity>() <= grad_tol) {
      converged = true;
      break;
    }

    // two-loop recursion
    Vec p = -gphi;
    if (!S.empty()) {
      std::vector<double> a(S.size());
      for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
        a[i] = rho[i] * S[i].dot(p);
        p -= a[i] * Y[i];
      }
      const double gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
      p *= gamma;
      for (size_t i = 0; i < S.size(); ++i) {
        const double b = rho[i] * Y[i].dot(p);
        p += (a[i] - b) * S[i];
      }
    }
    if (!(p.dot(gphi) < 0.0)) {  // not a descent direction; reset memory
      S.clear();
      Y.clear();
      rho.clear();
      p = -gphi;
    }

    // projected Armijo backtracking
    double alpha = S.empty() ? std::min(1.0, 1.0 / std::max(1.0, gphi.lpNorm<Eigen::Infinity>()))
                             : 1.0;
    Vec x_new, g_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = project(x + alpha * p, lo, hi);
      const Vec step = x_new - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      g_new.resize(n);
      f_new = f(x_new, &g_new);
      const double phi_new = -f_new;
      if (std::isfinite(phi_new) && phi_new <= -fx + kArmijo * gphi.dot(step)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      converged = true;  // line search exhausted; treat as stationary
      break;
    }

    const Vec s = x_new - x;
    const Vec y = -g_new - gphi;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > kHistory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    x = x_new;
    fx = f_new;
    gphi = -g_new;
  }

  if (value_out) *value_out = fx;
  if (iters_out) *iters_out = it;
  if (converged_out) *converged_out = converged;
  return x;
}

Vec boltzmann_weights(const Vec& values) {
  const Eigen::Index n = values.size();
  Vec w = Vec::Zero(n);
  std::vector<int> finite;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::isfinite(values[i])) finite.push_back(static_cast<int>(i));
  if (finite.empty()) return w;
  double mean = 0.0;
  for (int i : finite) mean += values[i];
  mean /= finite.size();
  double var = 0.0;
  for (int i : finite) var += (values[i] - mean) * (values[i] - mean);
  const double sd = finite.size() > 1 ? std::sqrt(var / (finite.size() - 1)) : 0.0;

  Vec z(finite.size());
  for (size_t k = 0; k < finite.size(); ++k)
    z[k] = sd > 0.0 ? (values[finite[k]] - mean) / sd : 0.0;
  const double m = z.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) sum += std::exp(z[k] - m);
  for (size_t k = 0; k < finite.size(); ++k) w[finite[k]] = std::exp(z[k] - m) / sum;
  return w;
}

Mat initialize_restarts(const Acquisition& acq, int q, const OptimConfig& cfg,
                        bool* fell_back_to_uniform) {
  const int d = acq.dim();
  const int nd = q * d;
  Rng rng(mix_seed(cfg.seed, 0x1417));
  if (fell_back_to_uniform) *fell_back_to_uniform = false;

  if (cfg.init_strategy == InitStrategy::kUniform) {
    return rng.uniform_matrix(cfg.n_restarts, nd);
  }

  // Boltzmann: score a random pool, then sample without replacement with
  // probability proportional to the softmax of standardized values
  // (Gumbel top-k).
  const int pool = std::max(cfg.raw_candidates, cfg.n_restarts);
  Mat cand = rng.uniform_matrix(pool, nd);
  Vec vals(pool);
  for (int i = 0; i < pool; ++i) {
    const Vec row = cand.row(i).transpose();
    Mat X = Eigen::Map<const Mat>(row.data(), d, q).transpose();
    double v;
    try {
      v = acq.eval(X, nullptr);
    } catch (const std::exception&) {
      v = std::numeric_limits<double>::quiet_NaN();
    }
    vals[i] = v;
  }
  const Vec w = boltzmann_weights(vals);
  if (w.sum() <= 0.0) {
    if (fell_back_to_uniform) *fell_back_to_uniform = true;
    return rng.uniform_matrix(cfg.n_restarts, nd);
  }
  std::vector<double> keys(pool, -std::numeric_limits<double>::infinity());
  for (int i = 0; i < pool; ++i) {
    if (w[i] > 0.0) {
      const double u = std::max(rng.uniform(), 1e-300);
      keys[i] = std::log(w[i]) - std::log(-std::log(u));  // Gumbel perturbation
    }
  }
  std::vector<int> order(pool);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + cfg.n_restarts, order.end(),
                    [&](int a, int b) { return keys[a] > keys[b]; });
  Mat out(cfg.n_restarts, nd);
  for (int r = 0; r < cfg.n_restarts; ++r) out.row(r) = cand.row(order[r]);
  return out;
}

namespace {

OptimReport optimize_joint(const Acquisition& acq, int q, const OptimConfig& cfg) {
  const int d = acq.dim();
  const int nd = q * d;
  OptimReport rep;
  rep.best_value = -std::numeric_limits<double>::infinity();
  Mat starts = initialize_restarts(acq, q, cfg, &rep.init_fallback_uniform);
  const Vec lo = Vec::Zero(nd), hi = Vec::Ones(nd);

  auto unflatten = [&](const Vec& v) {
    return Mat(Eigen::Map<const Mat>(v.data(), d, q).transpose());
  };
  BoxObjective obj = [&](const Vec& v, Vec* g) {
    Mat X = unflatten(v);
    if (!g) return acq.eval(X, nullptr);
    Mat gx = Mat::Zero(q, d);
    const double val = acq.eval(X, &gx);
    Mat gt = gx.transpose();
    *g = Eigen::Map<Vec>(gt.data(), nd);
    return val;
  };

  int successes = 0;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    RestartTrace tr;
    tr.start = starts.row(r).transpose();
    try {
      Vec g0(nd);
      const double f0 = obj(tr.start, &g0);
      if (std::isfinite(f0) && g0.lpNorm<Eigen::Infinity>() < kZeroGradThreshold)
        ++rep.zero_grad_restarts;
      tr.end = lbfgsb_local(obj, tr.start, lo, hi, cfg.max_iters, cfg.grad_tol, &tr.value,
                            &tr.iterations, &tr.converged);
    } catch (const std::runtime_error&) {
      tr.end = tr.start;
      tr.value = -std::numeric_limits<double>::infinity();
      tr.iterations = 0;
      tr.converged = false;
      rep.restarts.push_back(std::move(tr));
      continue;
    }
    ++successes;
    if (tr.value > rep.best_value) {  // strict: ties go to the lowest index
      rep.best_value = tr.value;
      rep.best_x = unflatten(tr.end);
    }
    rep.restarts.push_back(std::move(tr));
  }
  if (successes == 0) throw std::runtime_error("optimize_acq: all restarts failed");
  return rep;
}

}  // namespace

OptimReport optimize_acq(const Acquisition& acq, int q, const OptimConfig& cfg) {
  if (q < 1) throw std::invalid_argument("optimize_acq: q >= 1 required");
  if (q > acq.max_batch())
    throw std::invalid_argument("optimize_acq: acquisition does not support q = " +
                                std::to_string(q));
  if (cfg.mode == BatchMode::kJoint || q == 1) return optimize_joint(acq, q, cfg);

  if (!acq.supports_pending())
    throw std::invalid_argument("optimize_acq: sequential greedy needs pending support");

  // sequential greedy: q successive single-point problems, each conditioned
  // on the previously selected candidates via pending points
  OptimReport rep;
  rep.best_x.resize(q, acq.dim());
  rep.zero_grad_restarts = 0;
  Mat chosen(0, acq.dim());
  for (int s = 0; s < q; ++s) {
    std::unique_ptr<Acquisition> step = acq.with_pending(chosen);
    OptimConfig scfg = cfg;
    scfg.seed = mix_seed(cfg.seed, 0x5e9 + s);
    OptimReport srep = optimize_joint(*step, 1, scfg);
    rep.best_x.row(s) = srep.best_x.row(0);
    rep.zero_grad_restarts += srep.zero_grad_restarts;
    rep.init_fallback_uniform |= srep.init_fallback_uniform;
    for (auto& t : srep.restarts) rep.restarts.push_back(std::move(t));
    Mat grown(s + 1, acq.dim());
    if (s > 0) grown.topRows(s) = chosen;
    grown.row(s) = rep.best_x.row(s);
    chosen = grown;
  }
  rep.best_value = acq.eval(rep.best_x, nullptr);
  return rep;
}

}  // namespace logbo
