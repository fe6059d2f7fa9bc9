#include "logbo/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <atomic>
#include <cctype>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "logbo/acq_analytic.hpp"
#include "logbo/acq_mc.hpp"
#include "logbo/acq_mohv.hpp"
#include "logbo/rng.hpp"

namespace logbo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// seed stream tags
enum : uint64_t { kTagInit = 1, kTagFit = 2, kTagOpt = 3, kTagBase = 4, kTagNoise = 5 };

struct ReplicateState {
  Mat X;       // n x d unit cube
  Mat y_obs;   // n x M raw noisy observations
  Mat y_true;  // n x M noiseless values
};

void append_rows(ReplicateState& st, const Mat& Xnew, const Mat& yobs, const Mat& ytrue) {
  const int n0 = static_cast<int>(st.X.rows());
  const int add = static_cast<int>(Xnew.rows());
  st.X.conservativeResize(n0 + add, Eigen::NoChange);
  st.y_obs.conservativeResize(n0 + add, Eigen::NoChange);
  st.y_true.conservativeResize(n0 + add, Eigen::NoChange);
  st.X.bottomRows(add) = Xnew;
  st.y_obs.bottomRows(add) = yobs;
  st.y_true.bottomRows(add) = ytrue;
}

// best feasible true objective so far (maximization scale), or -inf
double best_feasible(const Problem& prob, const ReplicateState& st) {
  double best = kNegInf;
  for (int i = 0; i < st.y_true.rows(); ++i) {
    bool feas = true;
    for (int c = 0; c < prob.num_constraints; ++c)
      if (st.y_true(i, prob.num_objectives + c) > 0.0) feas = false;
    if (!feas) continue;
    best = std::max(best, prob.objective_max_scale(st.y_true(i, 0)));
  }
  return best;
}

double moo_hypervolume_true(const Problem& prob, const ReplicateState& st) {
  Mat Y = st.y_true.leftCols(2);
  return hypervolume(Y, prob.ref_point);
}

struct FittedModels {
  std::shared_ptr<GpModel> objective;                 // single-objective problems
  std::vector<std::shared_ptr<GpModel>> objectives;   // bi-objective problems
  std::vector<McConstraint> constraints;              // standardized thresholds
  std::vector<ConstraintSpec> constraint_specs;
  DataSet data;
  IncumbentState incumbent;
};

GpModel fit_with_retry(const Mat& X, const Vec& y, const FitOptions& opts, uint64_t seed) {
  try {
    return GpModel::fit(X, y, opts, seed);
  } catch (const std::runtime_error&) {
    return GpModel::fit(X, y, opts, mix_seed(seed, 0xf2e7));  // one retry with fresh draws
  }
}

FittedModels fit_models(const Problem& prob, const ReplicateState& st, uint64_t rep_seed,
                        int iter) {
  FittedModels out;
  const int M = prob.num_objectives + prob.num_constraints;

  // objectives on the maximization scale, constraints through bilog
  Mat raw(st.X.rows(), M);
  for (int i = 0; i < st.X.rows(); ++i) {
    for (int m = 0; m < prob.num_objectives; ++m)
      raw(i, m) = prob.objective_max_scale(st.y_obs(i, m));
    for (int c = 0; c < prob.num_constraints; ++c)
      raw(i, prob.num_objectives + c) = bilog(st.y_obs(i, prob.num_objectives + c));
  }
  out.data = DataSet::standardized(st.X, raw);

  FitOptions fopts;
  auto fit_col = [&](int m) {
    const uint64_t s = mix_seed(rep_seed, mix_seed(kTagFit, 100 * iter + m));
    return std::make_shared<GpModel>(fit_with_retry(st.X, out.data.outputs.col(m), fopts, s));
  };

  if (prob.num_objectives == 1) {
    out.objective = fit_col(0);
  } else {
    for (int m = 0; m < prob.num_objectives; ++m) out.objectives.push_back(fit_col(m));
  }
  for (int c = 0; c < prob.num_constraints; ++c) {
    const int col = prob.num_objectives + c;
    auto model = fit_col(col);
    // feasibility threshold 0 on the bilog scale, mapped to standardized units
    const double thr = out.data.scalers[col].apply(0.0);
    out.constraints.push_back({model, thr});
    out.constraint_specs.push_back({model, thr});
  }

  // incumbent: best feasible observed objective on the standardized scale
  if (prob.num_objectives == 1) {
    double best = kNegInf;
    for (int i = 0; i < st.X.rows(); ++i) {
      bool feas = true;
      for (int c = 0; c < prob.num_constraints; ++c)
        if (raw(i, prob.num_objectives + c) > 0.0) feas = false;
      if (feas) best = std::max(best, out.data.outputs(i, 0));
    }
    out.incumbent.has_feasible = std::isfinite(best);
    out.incumbent.y_star = out.incumbent.has_feasible ? best : 0.0;
  }
  return out;
}

std::unique_ptr<Acquisition> build_acquisition(const RunConfig& cfg, const Problem& prob,
                                               const FittedModels& fm, uint64_t rep_seed,
                                               int iter) {
  const std::string& name = cfg.acq;
  const uint64_t base_seed = mix_seed(rep_seed, mix_seed(kTagBase, iter));
  McOptions mco;
  mco.num_draws = cfg.num_draws;
  mco.fat = cfg.fat_smoothing;

  const bool moo = prob.num_objectives == 2;
  if (moo) {
    if (name != "qehvi" && name != "qlogehvi")
      throw std::invalid_argument(name + ": bi-objective problems need qehvi or qlogehvi");
    // frontier and boxes on the standardized scale of the current data
    Vec ref(2);
    for (int m = 0; m < 2; ++m) ref[m] = fm.data.scalers[m].apply(prob.ref_point[m]);
    Mat Ystd = fm.data.outputs.leftCols(2);
    ParetoFrontier front = ParetoFrontier::build(Ystd, ref);
    BoxDecomposition decomp = BoxDecomposition::build(front, objective_upper_bound(Ystd, ref));
    std::vector<std::shared_ptr<const GpModel>> models(fm.objectives.begin(),
                                                       fm.objectives.end());
    const int nd = cfg.num_draws > 0 ? cfg.num_draws : default_num_draws(cfg.q);
    if (name == "qehvi")
      return std::make_unique<QEhviAcquisition>(models, front, decomp, cfg.q, nd, base_seed);
    return std::make_unique<QLogEhviAcquisition>(models, front, decomp, cfg.temps, cfg.q, nd,
                                                 base_seed);
  }

  if (prob.num_constraints > 0 && name != "logcei" && name != "qlogcei")
    throw std::invalid_argument(name + ": constrained problems need logcei or qlogcei");

  if (name == "ei" || name == "logei" || name == "logpi") {
    const AnalyticKind kind = name == "ei" ? AnalyticKind::kEi
                              : name == "logei" ? AnalyticKind::kLogEi
                                                : AnalyticKind::kLogPi;
    return std::make_unique<AnalyticAcquisition>(kind, fm.objective, fm.incumbent);
  }
  if (name == "logcei")
    return std::make_unique<LogCeiAcquisition>(fm.objective, fm.constraint_specs, fm.incumbent);
  if (name == "qei")
    return std::make_unique<QeiMcAcquisition>(fm.objective, fm.incumbent, cfg.q, mco, base_seed);
  if (name == "qlogei")
    return std::make_unique<QLogEiAcquisition>(fm.objective, std::vector<McConstraint>{},
                                               fm.incumbent, cfg.temps, cfg.q, mco, base_seed);
  if (name == "qlogcei")
    return std::make_unique<QLogEiAcquisition>(fm.objective, fm.constraints, fm.incumbent,
                                               cfg.temps, cfg.q, mco, base_seed);
  if (name == "qlognei")
    return std::make_unique<QLogNeiAcquisition>(fm.objective, cfg.temps, cfg.q, mco, base_seed);
  throw std::invalid_argument("unknown acquisition: " + name);
}

std::vector<TrialRecord> run_replicate(const RunConfig& cfg, const Problem& prob, int rep) {
  const uint64_t rep_seed = mix_seed(cfg.seed, rep);
  const int d = prob.dim;
  const int M = prob.num_objectives + prob.num_constraints;
  const int n_init = cfg.n_init > 0 ? cfg.n_init : 2 * d;
  const bool moo = prob.num_objectives == 2;

  std::vector<TrialRecord> records;
  ReplicateState st;
  st.X.resize(0, d);
  st.y_obs.resize(0, M);
  st.y_true.resize(0, M);

  Rng noise_rng(mix_seed(rep_seed, kTagNoise));
  auto observe = [&](const Mat& Xnew) {
    Mat ytrue(Xnew.rows(), M), yobs(Xnew.rows(), M);
    for (int i = 0; i < Xnew.rows(); ++i) {
      const Vec v = prob.eval_unit(Xnew.row(i).transpose());
      ytrue.row(i) = v.transpose();
      yobs.row(i) = v.transpose();
      if (cfg.noise_fraction > 0.0) {
        const double sd = cfg.noise_fraction * prob.range_estimate;
        for (int m = 0; m < prob.num_objectives; ++m)
          yobs(i, m) += sd * noise_rng.normal();
      }
    }
    append_rows(st, Xnew, yobs, ytrue);
    return std::pair<Mat, Mat>(yobs, ytrue);
  };

  // initial design: seeded scrambled low-discrepancy points
  {
    Rng init_rng(mix_seed(rep_seed, kTagInit));
    Mat X0 = halton_scrambled(n_init, d, init_rng);
    auto [yobs, ytrue] = observe(X0);
    (void)ytrue;
    const double best =
        moo ? moo_hypervolume_true(prob, st) : best_feasible(prob, st);
    for (int i = 0; i < n_init; ++i) {
      TrialRecord r;
      r.replicate = rep;
      r.iteration = 0;
      r.phase = "init";
      r.x = X0.row(i).transpose();
      r.y = yobs.row(i).transpose();
      r.best = best;
      r.acq_value = std::numeric_limits<double>::quiet_NaN();
      r.seed = rep_seed;
      records.push_back(std::move(r));
    }
  }

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    FittedModels fm;
    try {
      fm = fit_models(prob, st, rep_seed, iter);
    } catch (const std::exception&) {
      TrialRecord r;
      r.replicate = rep;
      r.iteration = iter;
      r.phase = "failed";
      r.x = Vec::Zero(d);
      r.y = Vec::Zero(M);
      r.best = moo ? moo_hypervolume_true(prob, st) : best_feasible(prob, st);
      r.acq_value = std::numeric_limits<double>::quiet_NaN();
      r.seed = rep_seed;
      records.push_back(std::move(r));
      break;  // replicate marked failed, never silently dropped
    }
    auto acq = build_acquisition(cfg, prob, fm, rep_seed, iter);
    OptimConfig ocfg = cfg.opt;
    ocfg.seed = mix_seed(rep_seed, mix_seed(kTagOpt, iter));
    const OptimReport rep_opt = optimize_acq(*acq, cfg.q, ocfg);

    auto [yobs, ytrue] = observe(rep_opt.best_x);
    (void)ytrue;
    const auto t1 = std::chrono::steady_clock::now();
    const double wall =
        cfg.record_timings
            ? std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0)
                  .count()
            : 0.0;
    const double best = moo ? moo_hypervolume_true(prob, st) : best_feasible(prob, st);
    for (int j = 0; j < cfg.q; ++j) {
      TrialRecord r;
      r.replicate = rep;
      r.iteration = iter;
      r.phase = "bo";
      r.x = rep_opt.best_x.row(j).transpose();
      r.y = yobs.row(j).transpose();
      r.best = best;
      r.acq_value = rep_opt.best_value;
      r.zero_grad_restarts = rep_opt.zero_grad_restarts;
      r.wall_ms = wall;
      r.seed = rep_seed;
      records.push_back(std::move(r));
    }
  }
  return records;
}

}  // namespace

std::vector<TrialRecord> run_bo(const RunConfig& cfg) {
  if (cfg.replicates < 1) throw std::invalid_argument("run_bo: replicates >= 1");
  const Problem prob = make_problem(cfg.problem);
  cfg.temps.validate();

  std::vector<std::vector<TrialRecord>> per_rep(cfg.replicates);
  const int jobs = std::max(1, cfg.jobs);
  std::exception_ptr error;
  std::mutex error_mu;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= cfg.replicates) return;
      try {
        per_rep[rep] = run_replicate(cfg, prob, rep);
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  // deterministic merge in replicate order
  std::vector<TrialRecord> all;
  for (auto& v : per_rep)
    for (auto& r : v) all.push_back(std::move(r));
  return all;
}

void write_results(const std::vector<TrialRecord>& records, const std::string& path, int d,
                   int n_outputs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_results: cannot open " + path);
  out << "replicate,iteration,phase";
  for (int t = 0; t < d; ++t) out << ",x" << t;
  for (int m = 0; m < n_outputs; ++m) out << ",y" << m;
  out << ",best,acq_value,zero_grad_restarts,wall_ms,seed\n";
  for (const auto& r : records) {
    out << r.replicate << ',' << r.iteration << ',' << r.phase;
    for (int t = 0; t < d; ++t) out << ',' << fmt_double(t < r.x.size() ? r.x[t] : 0.0);
    for (int m = 0; m < n_outputs; ++m) out << ',' << fmt_double(m < r.y.size() ? r.y[m] : 0.0);
    out << ',' << fmt_double(r.best) << ',' << fmt_double(r.acq_value) << ','
        << r.zero_grad_restarts << ',' << fmt_double(r.wall_ms) << ',' << r.seed << '\n';
  }
  if (!out) throw std::runtime_error("write_results: write failed for " + path);
}

std::vector<TrialRecord> read_results(const std::string& path, int* d_out, int* n_outputs_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_results: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("read_results: empty file " + path);
  int d = 0, M = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind("x", 0) == 0 && col.size() > 1 && std::isdigit(col[1])) ++d;
      if (col.rfind("y", 0) == 0 && col.size() > 1 && std::isdigit(col[1])) ++M;
    }
  }
  if (d_out) *d_out = d;
  if (n_outputs_out) *n_outputs_out = M;

  std::vector<TrialRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    TrialRecord r;
    auto next_tok = [&]() {
      if (!std::getline(ss, tok, ',')) throw std::runtime_error("read_results: short row");
      return tok;
    };
    r.replicate = std::stoi(next_tok());
    r.iteration = std::stoi(next_tok());
    r.phase = next_tok();
    r.x.resize(d);
    for (int t = 0; t < d; ++t) r.x[t] = std::strtod(next_tok().c_str(), nullptr);
    r.y.resize(M);
    for (int m = 0; m < M; ++m) r.y[m] = std::strtod(next_tok().c_str(), nullptr);
    r.best = std::strtod(next_tok().c_str(), nullptr);
    r.acq_value = std::strtod(next_tok().c_str(), nullptr);
    r.zero_grad_restarts = std::stoi(next_tok());
    r.wall_ms = std::strtod(next_tok().c_str(), nullptr);
    r.seed = std::stoull(next_tok());
    out.push_back(std::move(r));
  }
  return out;
}

std::map<int, std::vector<double>> best_by_iteration(const std::vector<TrialRecord>& records) {
  // last row per (replicate, iteration) carries the post-iteration best
  std::map<std::pair<int, int>, double> last;
  for (const auto& r : records) last[{r.replicate, r.iteration}] = r.best;
  std::map<int, std::vector<double>> out;
  for (const auto& [key, best] : last) out[key.second].push_back(best);
  return out;
}

std::vector<GradFracRow> grad_vanish_experiment(const std::vector<int>& dims,
                                                const std::vector<int>& ns, int replicates,
                                                uint64_t seed, double threshold,
                                                int test_points) {
  std::vector<GradFracRow> rows;
  for (int d : dims) {
    const Problem prob = ackley(d);
    for (int n : ns) {
      double frac_ei = 0.0, frac_logei = 0.0;
      for (int rep = 0; rep < replicates; ++rep) {
        const uint64_t rs = mix_seed(seed, mix_seed(d * 1000 + n, rep));
        Rng rng(rs);
        // 80% uniform, 20% clustered at the optimum (std 0.25 of the domain)
        const int n_cluster = static_cast<int>(std::lround(0.2 * n));
        const int n_uniform = n - n_cluster;
        Mat X(n, d);
        for (int i = 0; i < n_uniform; ++i)
          for (int t = 0; t < d; ++t) X(i, t) = rng.uniform();
        for (int i = n_uniform; i < n; ++i)
          for (int t = 0; t < d; ++t)
            X(i, t) = std::clamp(0.5 + 0.25 * rng.normal(), 0.0, 1.0);
        Vec y(n);
        for (int i = 0; i < n; ++i)
          y[i] = prob.objective_max_scale(prob.eval_unit(X.row(i).transpose())[0]);

        IncumbentState inc;
        std::shared_ptr<GpModel> model;
        if (n >= 2) {
          DataSet data = DataSet::standardized(X, y);
          model = std::make_shared<GpModel>(
              fit_with_retry(X, data.outputs.col(0), FitOptions{}, mix_seed(rs, kTagFit)));
          inc.y_star = data.outputs.col(0).maxCoeff();
        } else {
          GpHyperparams hp;
          hp.lengthscales = Vec::Constant(d, 0.5);
          model = std::make_shared<GpModel>(Mat(0, d), Vec(0), hp);
          inc.y_star = 0.0;
        }
        AnalyticAcquisition ei(AnalyticKind::kEi, model, inc);
        AnalyticAcquisition logei(AnalyticKind::kLogEi, model, inc);

        int zero_ei = 0, zero_logei = 0;
        Mat g(1, d);
        for (int i = 0; i < test_points; ++i) {
          Mat Xt(1, d);
          for (int t = 0; t < d; ++t) Xt(0, t) = rng.uniform();
          ei.eval(Xt, &g);
          if (g.norm() < threshold) ++zero_ei;
          logei.eval(Xt, &g);
          if (g.norm() < threshold) ++zero_logei;
        }
        frac_ei += static_cast<double>(zero_ei) / test_points;
        frac_logei += static_cast<double>(zero_logei) / test_points;
      }
      rows.push_back({d, n, "ei", frac_ei / replicates});
      rows.push_back({d, n, "logei", frac_logei / replicates});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const GradFracRow& a, const GradFracRow& b) {
    return std::tie(a.d, a.n, a.acq) < std::tie(b.d, b.n, b.acq);
  });
  return rows;
}

std::vector<std::string> acquisition_names() {
  return {"ei", "logei", "logpi", "logcei", "qei", "qlogei", "qlogcei", "qlognei",
          "qehvi", "qlogehvi"};
}

// ---- RunConfig serialization ----

std::string RunConfig::to_json() const {
  nlohmann::json j;
  j["problem"] = problem;
  j["acq"] = acq;
  j["q"] = q;
  j["iterations"] = iterations;
  j["n_init"] = n_init;
  j["replicates"] = replicates;
  j["seed"] = seed;
  j["noise_fraction"] = noise_fraction;
  j["temps"] = {{"tau_0", temps.tau_0}, {"tau_max", temps.tau_max}, {"tau_cons", temps.tau_cons}};
  j["opt"] = {{"n_restarts", opt.n_restarts},
              {"raw_candidates", opt.raw_candidates},
              {"init_strategy", opt.init_strategy == InitStrategy::kBoltzmann ? "boltzmann" : "uniform"},
              {"max_iters", opt.max_iters},
              {"grad_tol", opt.grad_tol},
              {"mode", opt.mode == BatchMode::kSequentialGreedy ? "sequential_greedy" : "joint"}};
  j["num_draws"] = num_draws;
  j["fat_smoothing"] = fat_smoothing;
  j["record_timings"] = record_timings;
  j["jobs"] = jobs;
  j["out_path"] = out_path;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  RunConfig c;
  c.problem = j.value("problem", c.problem);
  c.acq = j.value("acq", c.acq);
  c.q = j.value("q", c.q);
  c.iterations = j.value("iterations", c.iterations);
  c.n_init = j.value("n_init", c.n_init);
  c.replicates = j.value("replicates", c.replicates);
  c.seed = j.value("seed", c.seed);
  c.noise_fraction = j.value("noise_fraction", c.noise_fraction);
  if (j.contains("temps")) {
    c.temps.tau_0 = j["temps"].value("tau_0", c.temps.tau_0);
    c.temps.tau_max = j["temps"].value("tau_max", c.temps.tau_max);
    c.temps.tau_cons = j["temps"].value("tau_cons", c.temps.tau_cons);
  }
  if (j.contains("opt")) {
    const auto& jo = j["opt"];
    c.opt.n_restarts = jo.value("n_restarts", c.opt.n_restarts);
    c.opt.raw_candidates = jo.value("raw_candidates", c.opt.raw_candidates);
    c.opt.max_iters = jo.value("max_iters", c.opt.max_iters);
    c.opt.grad_tol = jo.value("grad_tol", c.opt.grad_tol);
    if (jo.value("init_strategy", "uniform") == std::string("boltzmann"))
      c.opt.init_strategy = InitStrategy::kBoltzmann;
    if (jo.value("mode", "joint") == std::string("sequential_greedy"))
      c.opt.mode = BatchMode::kSequentialGreedy;
  }
  c.num_draws = j.value("num_draws", c.num_draws);
  c.fat_smoothing = j.value("fat_smoothing", c.fat_smoothing);
  c.record_timings = j.value("record_timings", c.record_timings);
  c.jobs = j.value("jobs", c.jobs);
  c.out_path = j.value("out_path", c.out_path);
  return c;
}

}  // namespace logbo
