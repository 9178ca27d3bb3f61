// eos: command-line front end for the single-neuron, mean-model and ReLU-network
// simulators and the sweep harness.
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eos/csv.hpp"
#include "eos/error.hpp"
#include "eos/harness.hpp"
#include "eos/losses.hpp"
#include "eos/mean_model.hpp"
#include "eos/relu_net.hpp"
#include "eos/single_neuron.hpp"

namespace {

using namespace eos;
using nlohmann::json;

constexpr int kExitError = 1;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EosError(ErrorCode::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Turns a flat JSON object {"eta": 0.01, "loss": "sqrt", "flag": true} into
// "--eta 0.01 --loss sqrt --flag" so config values go through the same parser
// as flags. They are placed before the user's flags, which therefore win.
std::vector<std::string> config_tokens(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw EosError(ErrorCode::InvalidArgument, path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw EosError(ErrorCode::InvalidArgument, path + " must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_string()) {
      tokens.push_back(flag);
      tokens.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      tokens.push_back(flag);
      tokens.push_back(value.dump());
    } else {
      throw EosError(ErrorCode::InvalidArgument, "config key '" + key + "' must be a scalar");
    }
  }
  return tokens;
}

// Expands a leading --config for every subcommand except `experiment`, whose
// --config is a sweep description handled by the harness.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::size_t words = 1;
  while (words < args.size() && !args[words].starts_with("-")) ++words;
  if (words > 1 && args[1] == "experiment") return args;

  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = words; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return args;
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(words));
  for (auto& t : config_tokens(*path)) out.push_back(std::move(t));
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::optional<std::uint64_t> env_seed() {
  const char* env = std::getenv("EOS_SEED");
  if (!env || !*env) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw EosError(ErrorCode::InvalidArgument, "EOS_SEED must be an unsigned integer");
  }
}

std::int64_t budget_iters(double time_budget, double eta) {
  return std::max<std::int64_t>(1, std::llround(time_budget / eta));
}

// ---- single-neuron -----------------------------------------------------------

struct SnRunArgs {
  std::string loss = "sqrt";
  double eta = 0.25;
  double x0 = 3.0;
  double y0 = 6.0;
  double tol = 1e-12;
  std::int64_t max_iters = 100'000'000;
  std::int64_t record_every = 1;
  std::optional<double> perturb;
  std::uint64_t seed = 7;
  std::string out = "traj.csv";
};

int sn_run(const SnRunArgs& a) {
  const LossSpec loss = LossSpec::parse(a.loss);
  single_neuron::StopRule stop;
  stop.tol_x = a.tol;
  stop.max_iters = a.max_iters;
  stop.record_every = a.record_every;
  const auto traj = a.perturb ? single_neuron::run_with_perturbation(a.x0, a.y0, loss, a.eta, stop,
                                                                     *a.perturb, a.seed)
                              : single_neuron::run(a.x0, a.y0, loss, a.eta, stop);

  csv::Writer out(a.out, {"t", "x", "y", "s", "r", "D", "delta", "phase"});
  for (std::size_t k = 0; k < traj.iters.size(); ++k) {
    const auto& st = traj.states[k];
    const auto& dg = traj.diags[k];
    out.row({traj.iters[k], st.x, st.y, dg.s, dg.r, dg.D, dg.delta,
             std::string(single_neuron::to_string(traj.phase_tags[k]))});
  }
  out.close();

  std::cout << "status=" << single_neuron::to_string(traj.status) << " iters=" << traj.final_iter
            << " regime=";
  try {
    std::cout << single_neuron::to_string(single_neuron::classify_regime(a.x0, a.y0, a.eta));
  } catch (const EosError&) {
    std::cout << "n/a";
  }
  if (traj.converged()) {
    std::cout << " limiting_sharpness=" << csv::format_double(single_neuron::limiting_sharpness(traj))
              << " two_over_eta=" << csv::format_double(2.0 / a.eta);
  }
  std::cout << '\n';
  if (traj.status == single_neuron::RunStatus::HitAxisExactly) {
    std::cerr << "eos: iterate hit x = 0 exactly above the stability threshold at t="
              << traj.final_iter << "; rerun with --perturb <eps>\n";
    return kExitError;
  }
  return 0;
}

struct SnSweepArgs {
  std::string loss = "higher-order:2";
  std::string grid = "log:1e-4:1e-1:40";
  std::string init_mode = "fixed-delta:1";
  double tol = 1e-12;
  std::int64_t max_iters = 200'000'000;
  int jobs = 1;
  std::string out = "sweep.csv";
};

int sn_sweep(const SnSweepArgs& a) {
  const LossSpec loss = LossSpec::parse(a.loss);
  const auto etas = harness::parse_grid(a.grid);
  single_neuron::StopRule stop;
  stop.tol_x = a.tol;
  stop.max_iters = a.max_iters;
  stop.record_every = 0;
  const auto rows = harness::single_neuron_sweep(loss, etas, harness::parse_init_mode(a.init_mode),
                                                 stop, a.jobs);
  csv::Writer out(a.out, {"eta", "limiting_sharpness", "gap_to_2_over_eta", "bounce_iters",
                          "crossing_iter"});
  int failed = 0;
  for (const auto& r : rows) {
    if (r.error) {
      std::cerr << "eos: eta=" << csv::format_double(r.eta) << ": " << *r.error << '\n';
      ++failed;
      continue;
    }
    out.row({r.eta, r.limiting_sharpness, r.gap, r.bounce_iters, r.crossing_iter});
  }
  out.close();
  return failed ? kExitError : 0;
}

// ---- mean-model --------------------------------------------------------------

struct MmRunArgs {
  int d = 200;
  double eta = 2.5e-3;
  double A0 = 1.0;
  double b0 = 0.0;
  std::int64_t max_iters = 10'000'000;
  std::int64_t record_every = 1;
  std::string out = "mm.csv";
};

int mm_run(const MmRunArgs& a) {
  mean_model::MeanModelConfig cfg;
  cfg.d = a.d;
  cfg.eta = a.eta;
  cfg.A0 = a.A0;
  cfg.b0 = a.b0;
  mean_model::MmStopRule stop;
  stop.max_iters = a.max_iters;
  stop.record_every = a.record_every;
  if (!cfg.b0_is_zero_start()) std::cerr << "eos: note: b0 != 0 is outside the analysed setting\n";
  const auto traj = mean_model::mm_run(cfg, stop);

  csv::Writer out(a.out, {"t", "A", "b", "sharp_proxy"});
  for (std::size_t k = 0; k < traj.iters.size(); ++k) {
    out.row({traj.iters[k], traj.A[k], traj.b[k], traj.sharp_proxy[k]});
  }
  out.close();
  std::cout << "status=" << mean_model::to_string(traj.status) << " iters=" << traj.final_iter
            << " eta_over_threshold=" << csv::format_double(cfg.eta_ratio())
            << " b_inf=" << csv::format_double(traj.b_inf())
            << " regime=" << mean_model::to_string(mean_model::classify(cfg, traj.b_inf()));
  if (traj.gamma) std::cout << " gamma=" << csv::format_double(*traj.gamma);
  std::cout << '\n';
  return traj.status == mean_model::MmStatus::HitAxisExactly ? kExitError : 0;
}

struct MmSweepArgs {
  int d = 200;
  std::string grid = "log:1e-5:1e-2:60";
  std::optional<double> A0;
  std::uint64_t seed = 7;
  double bias_level = 0.01;
  std::int64_t max_iters = 10'000'000;
  int jobs = 1;
  std::string out = "phase.csv";
};

int mm_sweep(const MmSweepArgs& a) {
  double A0 = 0.0;
  if (a.A0) {
    A0 = *a.A0;
  } else {
    const auto p = relu_net::default_init(a.d, a.seed);
    A0 = a.d * (p.a_minus + p.a_plus);
  }
  mean_model::MmStopRule stop;
  stop.max_iters = a.max_iters;
  const auto etas = harness::parse_grid(a.grid);
  const auto sweep = mean_model::phase_transition_sweep(a.d, A0, etas, a.bias_level, stop, a.jobs);
  csv::Writer out(a.out, {"eta", "eta_over_threshold", "b_inf", "regime"});
  for (const auto& p : sweep.points) {
    out.row({p.eta, p.eta_over_threshold, p.b_inf, std::string(mean_model::to_string(p.regime))});
  }
  out.close();
  std::cout << "A0=" << csv::format_double(A0) << " transition_eta=";
  if (sweep.transition_eta) {
    std::cout << csv::format_double(*sweep.transition_eta) << " ("
              << csv::format_double(*sweep.transition_eta / (8.0 * std::numbers::pi / (double(a.d) * a.d)))
              << " x 8pi/d^2)";
  } else {
    std::cout << "none";
  }
  std::cout << '\n';
  return 0;
}

// ---- relu ---------------------------------------------------------------------

struct ReluArgs {
  int d = 200;
  int n = 300;
  double lambda = 3.0;
  double eta = 2.5e-3;
  double time_budget = 10.0;
  std::uint64_t seed = 7;
  std::int64_t record_every = 1;
  std::string grid = "log:2.5e-4:2.5e-3:11";
  int jobs = 1;
  std::string out = "run.csv";
};

int relu_train(const ReluArgs& a) {
  const auto ds = relu_net::generate_dataset(a.d, a.n, a.lambda, a.seed);
  const auto p0 = relu_net::default_init(a.d, a.seed);
  relu_net::TrainOptions opts;
  opts.record_every = a.record_every;
  const auto traj = relu_net::train_full_batch(ds, p0, a.eta, budget_iters(a.time_budget, a.eta), opts);
  csv::Writer out(a.out, {"t", "a_minus", "a_plus", "A", "b", "loss", "sharpness", "test_acc"});
  for (std::size_t k = 0; k < traj.iters.size(); ++k) {
    const auto& p = traj.params[k];
    out.row({traj.iters[k], p.a_minus, p.a_plus, traj.A[k], p.b, traj.loss[k], traj.sharpness[k],
             traj.test_acc[k]});
  }
  out.close();
  std::cout << "b_final=" << csv::format_double(traj.final_params.b)
            << " max_sign_alternations=" << traj.max_sign_alternations
            << " test_acc=" << csv::format_double(traj.test_acc.back()) << '\n';
  return 0;
}

int relu_compare(const ReluArgs& a) {
  const auto ds = relu_net::generate_dataset(a.d, a.n, a.lambda, a.seed);
  const auto p0 = relu_net::default_init(a.d, a.seed);
  const auto rep = relu_net::compare_to_mean_model(ds, p0, a.eta, budget_iters(a.time_budget, a.eta));
  csv::Writer out(a.out, {"t", "b_net", "b_mm", "A_net", "A_mm"});
  for (std::size_t t = 0; t < rep.b_net.size(); ++t) {
    out.row({static_cast<long>(t), rep.b_net[t], rep.b_mm[t], rep.A_net[t], rep.A_mm[t]});
  }
  out.close();
  std::cout << "compared=" << rep.compared << " reached_bias_level=" << rep.reached_bias_level
            << " max_b_dev=" << csv::format_double(rep.max_b_dev)
            << " max_A_dev=" << csv::format_double(rep.max_A_dev) << '\n';
  return 0;
}

int report_experiment(const harness::ExperimentResult& r) {
  for (const auto& f : r.fits) {
    std::cout << (f.pass ? "PASS " : "FAIL ") << f.series;
    if (f.fit) {
      std::cout << " slope=" << csv::format_double(f.fit->slope)
                << " predicted=" << csv::format_double(f.fit->predicted_slope)
                << " r2=" << csv::format_double(f.fit->r_squared);
    }
    if (!f.note.empty()) std::cout << " (" << f.note << ")";
    std::cout << '\n';
  }
  for (const auto& c : r.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  }
  for (const auto& f : r.failures) {
    std::cerr << "eos: " << f.series << " eta=" << csv::format_double(f.eta) << ": " << f.error << '\n';
  }
  std::cout << "csv=" << r.csv_path << " summary=" << r.summary_path << '\n';
  return r.exit_code();
}

int relu_sweep(const ReluArgs& a) {
  harness::SweepConfig cfg = harness::default_config(harness::Experiment::ReluPhase);
  cfg.grid = a.grid;
  cfg.d = a.d;
  cfg.n = a.n;
  cfg.lambda = a.lambda;
  cfg.time_budget = a.time_budget;
  cfg.seed = a.seed;
  cfg.parallelism = a.jobs;
  cfg.out_path = a.out;
  return report_experiment(harness::run_experiment(cfg));
}

struct ExperimentArgs {
  std::optional<std::string> config;
  std::optional<std::string> name;
  std::optional<std::string> grid;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool plot = false;
};

int experiment(const ExperimentArgs& a) {
  harness::SweepConfig cfg;
  if (a.config) {
    cfg = harness::config_from_json(read_file(*a.config));
  } else if (a.name) {
    cfg = harness::default_config(harness::parse_experiment(*a.name));
  } else {
    throw EosError(ErrorCode::InvalidArgument, "experiment needs --config or --name");
  }
  harness::apply_env_overrides(cfg);
  if (a.grid) cfg.grid = *a.grid;
  if (a.out) cfg.out_path = *a.out;
  if (a.seed) cfg.seed = *a.seed;
  if (a.jobs) cfg.parallelism = *a.jobs;
  if (a.plot) cfg.emit_plot_script = true;
  return report_experiment(harness::run_experiment(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient descent at the edge of stability: simulators and sweeps", "eos"};
  app.set_version_flag("--version", std::string(harness::version()));
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--config", "JSON object whose keys are option names (flags win)");

  std::optional<std::uint64_t> seed_from_env;
  int code = 0;

  // single-neuron
  auto* sn = app.add_subcommand("single-neuron", "GD on f(x, y) = l(xy)");
  sn->require_subcommand(1);
  SnRunArgs snr;
  auto* sn_run_cmd = sn->add_subcommand("run", "one trajectory to CSV (t,x,y,s,r,D,delta,phase)");
  sn_run_cmd->add_option("--loss", snr.loss, "rsym-logistic|sqrt|huber|higher-order:<beta>|sym-logistic");
  sn_run_cmd->add_option("--eta", snr.eta)->check(CLI::PositiveNumber);
  sn_run_cmd->add_option("--x0", snr.x0);
  sn_run_cmd->add_option("--y0", snr.y0);
  sn_run_cmd->add_option("--tol", snr.tol, "stop once |x| < tol");
  sn_run_cmd->add_option("--max-iters", snr.max_iters);
  sn_run_cmd->add_option("--record-every", snr.record_every, "0 keeps only the first and last iterate");
  sn_run_cmd->add_option("--perturb", snr.perturb, "restart with x0 jittered by +/- eps on an exact axis hit");
  sn_run_cmd->add_option("--seed", snr.seed);
  sn_run_cmd->add_option("--out", snr.out);
  sn_run_cmd->callback([&] {
    if (seed_from_env && sn_run_cmd->count("--seed") == 0) snr.seed = *seed_from_env;
    code = sn_run(snr);
  });

  SnSweepArgs sns;
  auto* sn_sweep_cmd = sn->add_subcommand("sweep", "limiting sharpness and bounce counts over a step-size grid");
  sn_sweep_cmd->add_option("--loss", sns.loss);
  sn_sweep_cmd->add_option("--eta-grid", sns.grid, "log:lo:hi:n | lin:lo:hi:n | list:a,b,...");
  sn_sweep_cmd->add_option("--init-mode", sns.init_mode, "fixed-delta:<delta>");
  sn_sweep_cmd->add_option("--tol", sns.tol);
  sn_sweep_cmd->add_option("--max-iters", sns.max_iters);
  sn_sweep_cmd->add_option("--jobs", sns.jobs)->check(CLI::PositiveNumber);
  sn_sweep_cmd->add_option("--out", sns.out);
  sn_sweep_cmd->callback([&] { code = sn_sweep(sns); });

  // mean-model
  auto* mm = app.add_subcommand("mean-model", "the (A, b) reduced dynamics");
  mm->require_subcommand(1);
  MmRunArgs mmr;
  auto* mm_run_cmd = mm->add_subcommand("run", "one trajectory to CSV (t,A,b,sharp_proxy)");
  mm_run_cmd->add_option("--d", mmr.d)->check(CLI::PositiveNumber);
  mm_run_cmd->add_option("--eta", mmr.eta)->check(CLI::PositiveNumber);
  mm_run_cmd->add_option("--A0", mmr.A0);
  mm_run_cmd->add_option("--b0", mmr.b0);
  mm_run_cmd->add_option("--max-iters", mmr.max_iters);
  mm_run_cmd->add_option("--record-every", mmr.record_every);
  mm_run_cmd->add_option("--out", mmr.out);
  mm_run_cmd->callback([&] { code = mm_run(mmr); });

  MmSweepArgs mms;
  auto* mm_sweep_cmd = mm->add_subcommand("sweep", "limiting bias across step sizes");
  mm_sweep_cmd->add_option("--d", mms.d)->check(CLI::PositiveNumber);
  mm_sweep_cmd->add_option("--eta-grid", mms.grid);
  mm_sweep_cmd->add_option("--A0", mms.A0, "default: d(a- + a+) with a+- ~ N(0, 1/(2d)) from --seed");
  mm_sweep_cmd->add_option("--seed", mms.seed);
  mm_sweep_cmd->add_option("--bias-level", mms.bias_level, "transition = first eta with b_inf <= -level");
  mm_sweep_cmd->add_option("--max-iters", mms.max_iters);
  mm_sweep_cmd->add_option("--jobs", mms.jobs)->check(CLI::PositiveNumber);
  mm_sweep_cmd->add_option("--out", mms.out);
  mm_sweep_cmd->callback([&] {
    if (seed_from_env && mm_sweep_cmd->count("--seed") == 0) mms.seed = *seed_from_env;
    code = mm_sweep(mms);
  });

  // relu
  auto* relu = app.add_subcommand("relu", "two-layer ReLU network on sparse-coding data");
  relu->require_subcommand(1);
  ReluArgs ra;
  auto add_relu_common = [&](CLI::App* c) {
    c->add_option("--d", ra.d)->check(CLI::PositiveNumber);
    c->add_option("--n", ra.n)->check(CLI::PositiveNumber);
    c->add_option("--lambda", ra.lambda);
    c->add_option("--time-budget", ra.time_budget, "iterations = round(time_budget / eta)");
    c->add_option("--seed", ra.seed);
    c->add_option("--out", ra.out);
  };
  auto* relu_train_cmd = relu->add_subcommand("train", "full-batch GD to CSV");
  add_relu_common(relu_train_cmd);
  relu_train_cmd->add_option("--eta", ra.eta)->check(CLI::PositiveNumber);
  relu_train_cmd->add_option("--record-every", ra.record_every);
  auto* relu_sweep_cmd = relu->add_subcommand("sweep-eta", "final bias across step sizes");
  add_relu_common(relu_sweep_cmd);
  relu_sweep_cmd->add_option("--eta-grid", ra.grid);
  relu_sweep_cmd->add_option("--jobs", ra.jobs)->check(CLI::PositiveNumber);
  auto* relu_cmp_cmd = relu->add_subcommand("compare-mm", "network vs mean model, per iteration");
  add_relu_common(relu_cmp_cmd);
  relu_cmp_cmd->add_option("--eta", ra.eta)->check(CLI::PositiveNumber);
  for (auto* c : {relu_train_cmd, relu_sweep_cmd, relu_cmp_cmd}) {
    c->callback([&, c] {
      if (seed_from_env && c->count("--seed") == 0) ra.seed = *seed_from_env;
      if (c == relu_train_cmd) code = relu_train(ra);
      else if (c == relu_sweep_cmd) code = relu_sweep(ra);
      else code = relu_compare(ra);
    });
  }

  // experiment
  ExperimentArgs ea;
  auto* exp = app.add_subcommand("experiment", "named sweep with CSV + JSON summary");
  exp->add_option("--config", ea.config, "sweep description (JSON)");
  exp->add_option("--name", ea.name,
                  "single-neuron-gap|single-neuron-bounce|mean-model-phase|relu-phase|relu-vs-mean-model");
  exp->add_option("--grid", ea.grid);
  exp->add_option("--out", ea.out);
  exp->add_option("--seed", ea.seed);
  exp->add_option("--jobs", ea.jobs)->check(CLI::PositiveNumber);
  exp->add_flag("--emit-plot-script", ea.plot);
  exp->callback([&] { code = experiment(ea); });

  try {
    seed_from_env = env_seed();
    const std::vector<std::string> args = expand_config(argc, argv);
    // CLI11 takes the arguments reversed and without the program name.
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  } catch (const EosError& e) {
    std::cerr << "eos: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "eos: " << e.what() << '\n';
    return kExitError;
  }
  return code;
}
