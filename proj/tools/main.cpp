// Command-line driver: benchmark runs, the vanishing-gradient diagnostic,
// single-shot acquisition evaluation, oracle-table verification, and result
// summaries. Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "logbo/acq_analytic.hpp"
#include "logbo/harness.hpp"
#include "logbo/stable_math.hpp"

namespace {

using namespace logbo;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

struct BenchFlags {
  RunConfig cfg;
  std::string config_path;
  std::string init_strategy = "uniform";
  std::string mode = "joint";
};

void add_bench_flags(CLI::App* cmd, BenchFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run config; explicit flags override");
  cmd->add_option("--problem", f.cfg.problem, "problem name");
  cmd->add_option("--acq", f.cfg.acq, "acquisition name");
  cmd->add_option("--q", f.cfg.q, "batch size");
  cmd->add_option("--iters", f.cfg.iterations, "BO iterations");
  cmd->add_option("--n-init", f.cfg.n_init, "initial design size (default 2d)");
  cmd->add_option("--reps", f.cfg.replicates, "replicates");
  cmd->add_option("--seed", f.cfg.seed, "master seed");
  cmd->add_option("--noise", f.cfg.noise_fraction, "noise std as fraction of objective range");
  cmd->add_option("--tau0", f.cfg.temps.tau_0, "softplus/fatplus temperature");
  cmd->add_option("--tau-max", f.cfg.temps.tau_max, "max-relaxation exponent");
  cmd->add_option("--tau-cons", f.cfg.temps.tau_cons, "constraint sigmoid temperature");
  cmd->add_option("--restarts", f.cfg.opt.n_restarts, "optimizer restarts");
  cmd->add_option("--raw-candidates", f.cfg.opt.raw_candidates, "Boltzmann candidate pool");
  cmd->add_option("--init-strategy", f.init_strategy, "uniform | boltzmann");
  cmd->add_option("--opt-iters", f.cfg.opt.max_iters, "local optimizer iteration cap");
  cmd->add_option("--grad-tol", f.cfg.opt.grad_tol, "projected-gradient tolerance");
  cmd->add_option("--mode", f.mode, "joint | sequential_greedy");
  cmd->add_option("--draws", f.cfg.num_draws, "MC draws (0 = default)");
  cmd->add_flag("!--no-fat", f.cfg.fat_smoothing, "canonical softplus instead of fat-tailed");
  cmd->add_flag("!--no-timings", f.cfg.record_timings, "zero out wall_ms (byte-stable output)");
  cmd->add_option("--jobs", f.cfg.jobs, "parallel replicates");
  cmd->add_option("--out", f.cfg.out_path, "output CSV path");
}

RunConfig resolve_config(CLI::App* cmd, BenchFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + f.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = RunConfig::from_json(ss.str());
  }
  // flags override file values
  auto seen = [&](const std::string& name) { return cmd->count(name) > 0; };
  if (seen("--problem")) cfg.problem = f.cfg.problem;
  if (seen("--acq")) cfg.acq = f.cfg.acq;
  if (seen("--q")) cfg.q = f.cfg.q;
  if (seen("--iters")) cfg.iterations = f.cfg.iterations;
  if (seen("--n-init")) cfg.n_init = f.cfg.n_init;
  if (seen("--reps")) cfg.replicates = f.cfg.replicates;
  if (seen("--seed")) cfg.seed = f.cfg.seed;
  if (seen("--noise")) cfg.noise_fraction = f.cfg.noise_fraction;
  if (seen("--tau0")) cfg.temps.tau_0 = f.cfg.temps.tau_0;
  if (seen("--tau-max")) cfg.temps.tau_max = f.cfg.temps.tau_max;
  if (seen("--tau-cons")) cfg.temps.tau_cons = f.cfg.temps.tau_cons;
  if (seen("--restarts")) cfg.opt.n_restarts = f.cfg.opt.n_restarts;
  if (seen("--raw-candidates")) cfg.opt.raw_candidates = f.cfg.opt.raw_candidates;
  if (seen("--opt-iters")) cfg.opt.max_iters = f.cfg.opt.max_iters;
  if (seen("--grad-tol")) cfg.opt.grad_tol = f.cfg.opt.grad_tol;
  if (seen("--draws")) cfg.num_draws = f.cfg.num_draws;
  if (seen("--no-fat")) cfg.fat_smoothing = f.cfg.fat_smoothing;
  if (seen("--no-timings")) cfg.record_timings = f.cfg.record_timings;
  if (seen("--jobs")) cfg.jobs = f.cfg.jobs;
  if (seen("--out")) cfg.out_path = f.cfg.out_path;
  if (seen("--init-strategy")) {
    if (f.init_strategy == "boltzmann")
      cfg.opt.init_strategy = InitStrategy::kBoltzmann;
    else if (f.init_strategy == "uniform")
      cfg.opt.init_strategy = InitStrategy::kUniform;
    else
      throw CLI::ValidationError("--init-strategy", "expected uniform or boltzmann");
  }
  if (seen("--mode")) {
    if (f.mode == "sequential_greedy")
      cfg.opt.mode = BatchMode::kSequentialGreedy;
    else if (f.mode == "joint")
      cfg.opt.mode = BatchMode::kJoint;
    else
      throw CLI::ValidationError("--mode", "expected joint or sequential_greedy");
  }
  return cfg;
}

int cmd_bench(const RunConfig& cfg) {
  if (cfg.problem.empty()) {
    std::cerr << "bench: --problem required; known problems: " << join(problem_names()) << "\n";
    return 2;
  }
  bool known_acq = false;
  for (const auto& a : acquisition_names()) known_acq |= (a == cfg.acq);
  if (!known_acq) {
    std::cerr << "bench: unknown acquisition '" << cfg.acq
              << "'; registered: " << join(acquisition_names()) << "\n";
    return 2;
  }
  if (cfg.out_path.empty()) {
    std::cerr << "bench: --out required\n";
    return 2;
  }
  Problem prob;
  try {
    prob = make_problem(cfg.problem);
  } catch (const std::invalid_argument& e) {
    std::cerr << "bench: " << e.what() << "; known problems: " << join(problem_names()) << "\n";
    return 2;
  }
  std::cout << "resolved config:\n" << cfg.to_json() << "\n";
  const auto records = run_bo(cfg);
  write_results(records, cfg.out_path, prob.dim, prob.num_objectives + prob.num_constraints);
  std::ofstream cfg_out(cfg.out_path + ".config.json");
  cfg_out << cfg.to_json() << "\n";
  std::cout << "wrote " << records.size() << " rows to " << cfg.out_path << "\n";
  return 0;
}

int cmd_gradfrac(const std::vector<int>& dims, const std::vector<int>& ns, int reps,
                 uint64_t seed, double threshold, const std::string& out_path) {
  const auto rows = grad_vanish_experiment(dims, ns, reps, seed, threshold);
  std::ostringstream os;
  os << "d,n,acq,fraction\n";
  for (const auto& r : rows)
    os << r.d << ',' << r.n << ',' << r.acq << ',' << fmt(r.fraction) << '\n';
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "gradfrac: cannot open " << out_path << "\n";
      return 1;
    }
    out << os.str();
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  }
  return 0;
}

int cmd_acq_eval(const std::string& model_path, const std::string& acq_name,
                 const std::string& x_csv, double ystar, bool ystar_given) {
  std::ifstream in(model_path);
  if (!in) {
    std::cerr << "acq-eval: cannot open model file " << model_path << "\n";
    return 2;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  Standardizer scaler;
  GpModel model = GpModel::from_json(ss.str(), &scaler);
  if (model.num_points() == 0) {
    std::cerr << "acq-eval: model file carries no data section\n";
    return 2;
  }
  Vec x(model.dim());
  {
    std::stringstream xs(x_csv);
    std::string tok;
    int t = 0;
    while (std::getline(xs, tok, ',') && t < model.dim()) x[t++] = std::stod(tok);
    if (t != model.dim()) {
      std::cerr << "acq-eval: expected " << model.dim() << " coordinates\n";
      return 2;
    }
  }
  IncumbentState inc;
  inc.y_star = ystar_given ? ystar : model.train_outputs().maxCoeff();
  AnalyticKind kind;
  if (acq_name == "ei") kind = AnalyticKind::kEi;
  else if (acq_name == "logei") kind = AnalyticKind::kLogEi;
  else if (acq_name == "logpi") kind = AnalyticKind::kLogPi;
  else {
    std::cerr << "acq-eval: supported acquisitions: ei, logei, logpi\n";
    return 2;
  }
  auto shared = std::make_shared<const GpModel>(std::move(model));
  AnalyticAcquisition acq(kind, shared, inc);
  Mat X = x.transpose();
  Mat g(1, shared->dim());
  const double v = acq.eval(X, &g);
  std::cout << "value " << fmt(v) << "\n";
  std::cout << "gradient";
  for (int t = 0; t < g.cols(); ++t) std::cout << ' ' << fmt(g(0, t));
  std::cout << "\n";
  if (acq.sigma_floored())
    std::cout << "warning: posterior sigma floored to " << fmt(acq.last_sigma()) << "\n";
  return 0;
}

double eval_oracle_fn(const std::string& name, double x) {
  if (name == "log1mexp") return log1mexp(x);
  if (name == "erfcx") return erfcx(x);
  if (name == "log_ndtr") return log_ndtr(x);
  if (name == "logerfc") return logerfc(x);
  if (name == "log_h") return log_h(x);
  if (name == "logsoftplus") return logsoftplus(x, 1.0);
  throw std::invalid_argument("unknown fixture function: " + name);
}

int cmd_verify_oracles(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "verify-oracles: cannot open fixture file " << path << "\n";
    return 2;
  }
  const auto& c = StableConstants::get();
  std::map<std::string, double> max_rel;
  std::vector<std::string> offenders;
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, xs, rs;
    if (!std::getline(ss, name, '\t') || !std::getline(ss, xs, '\t') || !std::getline(ss, rs))
      continue;
    const double x = std::strtod(xs.c_str(), nullptr);
    const double ref = std::strtod(rs.c_str(), nullptr);
    const double got = eval_oracle_fn(name, x);
    const double rel = std::abs(got - ref) / std::max(std::abs(ref), 1e-300);
    auto [it, ok] = max_rel.try_emplace(name, 0.0);
    (void)ok;
    it->second = std::max(it->second, rel);
    // looser bar for the erfcx/log1mexp middle branch of log_h
    const bool mid = name == "log_h" && x <= -1.0 && x > -c.inv_sqrt_eps;
    const double tol = mid ? 1e-9 : 1e-12;
    if (rel > tol)
      offenders.push_back(name + " x=" + xs + " got=" + fmt(got) + " ref=" + rs +
                          " rel=" + fmt(rel));
    ++rows;
  }
  if (rows == 0) {
    std::cerr << "verify-oracles: no fixture rows in " << path << "\n";
    return 2;
  }
  for (const auto& [name, rel] : max_rel)
    std::cout << name << " max_rel_error " << fmt(rel) << "\n";
  if (!offenders.empty()) {
    std::cerr << offenders.size() << " rows beyond tolerance:\n";
    for (const auto& o : offenders) std::cerr << "  " << o << "\n";
    return 1;
  }
  std::cout << rows << " rows verified\n";
  return 0;
}

int cmd_summarize(const std::string& path) {
  const auto records = read_results(path);
  const auto traj = best_by_iteration(records);
  std::cout << "iteration,n,mean_best,two_se,median_best\n";
  for (const auto& [iter, vals] : traj) {
    std::vector<double> v = vals;
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    const double median =
        v.size() % 2 == 1 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    std::cout << iter << ',' << v.size() << ',' << fmt(mean) << ',' << fmt(2.0 * se) << ','
              << fmt(median) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"log-space Bayesian optimization toolkit"};
  app.require_subcommand(1);
  app.footer("problems: " + join(problem_names()) +
             "\nacquisitions: " + join(acquisition_names()));

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "run a BO experiment and write a CSV");
  add_bench_flags(bench, bf);

  std::vector<int> gf_dims = {2, 8, 16};
  std::vector<int> gf_ns = {10, 20, 40, 80};
  int gf_reps = 10;
  uint64_t gf_seed = 0;
  double gf_threshold = 1e-10;
  std::string gf_out;
  auto* gradfrac = app.add_subcommand("gradfrac", "vanishing-gradient fraction table");
  gradfrac->add_option("--dims", gf_dims, "dimensions");
  gradfrac->add_option("--ns", gf_ns, "training-set sizes");
  gradfrac->add_option("--reps", gf_reps, "replicates per cell");
  gradfrac->add_option("--seed", gf_seed, "seed");
  gradfrac->add_option("--threshold", gf_threshold, "gradient-magnitude threshold");
  gradfrac->add_option("--out", gf_out, "output CSV (stdout when omitted)");

  std::string ae_model, ae_acq = "logei", ae_x;
  double ae_ystar = 0.0;
  auto* acq_eval = app.add_subcommand("acq-eval", "evaluate an acquisition on a saved model");
  acq_eval->add_option("--model", ae_model, "model JSON (with data section)")->required();
  acq_eval->add_option("--acq", ae_acq, "ei | logei | logpi");
  acq_eval->add_option("--x", ae_x, "comma-separated unit-cube coordinates")->required();
  auto* ystar_opt = acq_eval->add_option("--ystar", ae_ystar, "incumbent (default: best output)");

  std::string vo_path = "data/oracles.tsv";
  auto* verify = app.add_subcommand("verify-oracles", "check fixtures against the implementation");
  verify->add_option("--fixtures", vo_path, "fixture TSV path");

  std::string sm_path;
  auto* summarize = app.add_subcommand("summarize", "per-iteration mean/SE of best values");
  summarize->add_option("--in", sm_path, "results CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (bench->parsed()) return cmd_bench(resolve_config(bench, bf));
    if (gradfrac->parsed())
      return cmd_gradfrac(gf_dims, gf_ns, gf_reps, gf_seed, gf_threshold, gf_out);
    if (acq_eval->parsed())
      return cmd_acq_eval(ae_model, ae_acq, ae_x, ae_ystar, ystar_opt->count() > 0);
    if (verify->parsed()) return cmd_verify_oracles(vo_path);
    if (summarize->parsed()) return cmd_summarize(sm_path);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
