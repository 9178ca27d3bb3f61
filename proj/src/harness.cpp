#include "eos/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "eos/csv.hpp"
#include "eos/error.hpp"
#include "eos/mean_model.hpp"
#include "eos/parallel.hpp"
#include "eos/relu_net.hpp"

namespace eos::harness {

namespace {

using nlohmann::json;

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw EosError(ErrorCode::InvalidArgument,
                   "cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string stem_of(const std::string& path) {
  constexpr std::string_view ext = ".csv";
  if (path.size() > ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
    return path.substr(0, path.size() - ext.size());
  }
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EosError(ErrorCode::Io, "cannot open " + path + " for writing");
  out << text;
  if (!out) throw EosError(ErrorCode::Io, "write failed for " + path);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json fit_to_json(const NamedFit& nf) {
  json j{{"series", nf.series}, {"pass", nf.pass}, {"note", nf.note}};
  if (nf.fit) {
    j["slope"] = nf.fit->slope;
    j["intercept"] = nf.fit->intercept;
    j["r_squared"] = nf.fit->r_squared;
    j["predicted_slope"] = nf.fit->predicted_slope;
    j["tolerance"] = nf.fit->tolerance;
    j["points"] = nf.fit->points;
  }
  return j;
}

json config_json(const SweepConfig& cfg) {
  json series = json::array();
  for (const auto& s : cfg.series) series.push_back({{"loss", s.loss}, {"grid", s.grid}});
  json j{{"experiment", std::string(to_string(cfg.experiment))},
         {"grid", cfg.grid},
         {"series", series},
         {"seed", cfg.seed},
         {"seeds", cfg.seeds},
         {"out", cfg.out_path},
         {"parallelism", cfg.parallelism},
         {"emit_plot_script", cfg.emit_plot_script},
         {"delta", cfg.delta},
         {"max_iters", cfg.max_iters},
         {"tol_x", cfg.tol_x},
         {"d", cfg.d},
         {"n", cfg.n},
         {"lambda", cfg.lambda},
         {"time_budget", cfg.time_budget},
         {"bias_level", cfg.bias_level},
         {"b_tolerance", cfg.b_tolerance}};
  j["fit_x_max"] = cfg.fit_x_max ? json(*cfg.fit_x_max) : json(nullptr);
  j["slope_tolerance"] = cfg.slope_tolerance ? json(*cfg.slope_tolerance) : json(nullptr);
  j["A0"] = cfg.A0 ? json(*cfg.A0) : json(nullptr);
  return j;
}

// ---- experiments --------------------------------------------------------------

struct Outputs {
  ExperimentResult result;
  std::string plot_x;
  std::string plot_y;
  std::string plot_group;
  bool plot_log_y = true;
};

std::vector<Series> effective_series(const SweepConfig& cfg) {
  std::vector<Series> out = cfg.series;
  for (auto& s : out) {
    if (s.grid.empty()) s.grid = cfg.grid;
  }
  return out;
}

void run_single_neuron(const SweepConfig& cfg, Outputs& o) {
  const bool gap_mode = cfg.experiment == Experiment::SingleNeuronGapScaling;
  single_neuron::StopRule stop;
  stop.tol_x = cfg.tol_x;
  stop.max_iters = cfg.max_iters;
  stop.record_every = 0;

  csv::Writer out(o.result.csv_path, {"loss", "eta", "status", "final_iter", "limiting_sharpness",
                                      "gap_to_2_over_eta", "bounce_iters", "crossing_iter"});
  for (const auto& series : effective_series(cfg)) {
    const LossSpec loss = LossSpec::parse(series.loss);
    const auto etas = parse_grid(series.grid);
    const auto rows = single_neuron_sweep(loss, etas, cfg.delta, stop, cfg.parallelism);

    std::vector<double> xs, ys;
    std::size_t converged = 0;
    for (const auto& r : rows) {
      if (r.error) {
        o.result.failures.push_back({series.loss, r.eta, *r.error});
        continue;
      }
      out.row({series.loss, r.eta, std::string(single_neuron::to_string(r.status)), r.final_iter,
               r.limiting_sharpness, r.gap, r.bounce_iters, r.crossing_iter});
      if (!r.ok()) continue;
      ++converged;
      const double y = gap_mode ? r.gap : static_cast<double>(r.bounce_iters);
      if (y > 0.0) {
        xs.push_back(r.eta);
        ys.push_back(y);
      }
    }

    NamedFit nf;
    nf.series = series.loss;
    std::ostringstream note;
    note << converged << " of " << rows.size() << " runs converged";
    if (!std::isfinite(loss.beta)) {
      note << "; no power law predicted for beta = inf";
      nf.note = note.str();
      o.result.fits.push_back(nf);
      continue;
    }
    const double predicted = gap_mode ? 1.0 / (loss.beta - 1.0) : predicted_bounce_slope(loss.beta);
    const double tol = cfg.slope_tolerance.value_or(gap_mode ? 0.15 : 0.2);
    try {
      nf.fit = fit_power_law(xs, ys, predicted, tol, cfg.fit_x_max);
      nf.pass = nf.fit->pass;
    } catch (const EosError& e) {
      note << "; fit failed: " << e.what();
    }
    if (!gap_mode && loss.beta == 2.0) {
      // Log-corrected law: count ~ log(1/eta)/eta^2, judged by ratio stability.
      std::vector<double> ratios;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        if (cfg.fit_x_max && !(xs[k] < *cfg.fit_x_max)) continue;
        ratios.push_back(ys[k] / (std::log(1.0 / xs[k]) / (xs[k] * xs[k])));
      }
      double mean = 0.0;
      for (double r : ratios) mean += r;
      mean /= std::max<std::size_t>(ratios.size(), 1);
      double spread = 0.0;
      for (double r : ratios) spread = std::max(spread, std::fabs(r / mean - 1.0));
      nf.pass = ratios.size() >= 8 && spread <= 0.2;
      note << "; log-corrected law, ratio to log(1/eta)/eta^2 has mean " << mean
           << " and max relative deviation " << spread;
    }
    nf.note = note.str();
    o.result.fits.push_back(nf);
  }
  out.close();
  o.plot_x = "eta";
  o.plot_y = gap_mode ? "gap_to_2_over_eta" : "bounce_iters";
  o.plot_group = "loss";
}

void run_mean_model_phase(const SweepConfig& cfg, Outputs& o) {
  const auto etas = parse_grid(cfg.grid);
  mean_model::MmStopRule stop;
  stop.max_iters = cfg.max_iters;
  const double threshold = 8.0 * std::numbers::pi / (static_cast<double>(cfg.d) * cfg.d);

  csv::Writer out(o.result.csv_path, {"seed", "A0", "eta", "eta_over_threshold", "b_inf", "regime",
                                      "status", "iters"});
  for (int s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    double A0 = 0.0;
    if (cfg.A0) {
      A0 = *cfg.A0;
    } else {
      const auto p = relu_net::default_init(cfg.d, seed);
      A0 = cfg.d * (p.a_minus + p.a_plus);
    }
    const auto sweep = mean_model::phase_transition_sweep(cfg.d, A0, etas, cfg.bias_level, stop,
                                                          cfg.parallelism);
    for (const auto& p : sweep.points) {
      out.row({static_cast<unsigned long>(seed), A0, p.eta, p.eta_over_threshold, p.b_inf,
               std::string(mean_model::to_string(p.regime)),
               std::string(mean_model::to_string(p.status)), p.iters});
    }
    Check check;
    check.name = "transition within 10% of 8pi/d^2 (seed " + std::to_string(seed) + ")";
    std::ostringstream detail;
    if (sweep.transition_eta) {
      const double ratio = *sweep.transition_eta / threshold;
      check.pass = std::fabs(ratio - 1.0) <= 0.1;
      detail << "first eta with b_inf <= " << -cfg.bias_level << " at " << ratio << " x threshold";
      o.result.metrics.emplace_back("transition_ratio_seed_" + std::to_string(seed), ratio);
    } else {
      detail << "no grid point reached b_inf <= " << -cfg.bias_level;
    }
    check.detail = detail.str();
    o.result.checks.push_back(check);
  }
  out.close();
  o.plot_x = "eta";
  o.plot_y = "b_inf";
  o.plot_group = "seed";
  o.plot_log_y = false;
}

std::int64_t budget_iters(double time_budget, double eta) {
  return std::max<std::int64_t>(1, std::llround(time_budget / eta));
}

void run_relu_phase(const SweepConfig& cfg, Outputs& o) {
  const auto etas = parse_grid(cfg.grid);
  const auto ds = relu_net::generate_dataset(cfg.d, cfg.n, cfg.lambda, cfg.seed);
  const auto p0 = relu_net::default_init(cfg.d, cfg.seed);
  const double threshold = 8.0 * std::numbers::pi / (static_cast<double>(cfg.d) * cfg.d);

  std::vector<std::optional<relu_net::ReluTrajectory>> runs(etas.size());
  std::vector<std::string> errors(etas.size());
  parallel_for(etas.size(), cfg.parallelism, [&](std::size_t i) {
    try {
      relu_net::TrainOptions opts;
      const auto iters = budget_iters(cfg.time_budget, etas[i]);
      opts.record_every = iters;
      opts.track_sharpness = false;
      runs[i] = relu_net::train_full_batch(ds, p0, etas[i], iters, opts);
    } catch (const EosError& e) {
      errors[i] = e.what();
    }
  });

  csv::Writer out(o.result.csv_path, {"eta", "eta_over_threshold", "iters", "b_final", "A_final",
                                      "loss_final", "test_acc", "max_sign_alternations"});
  std::optional<double> knee;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!runs[i]) {
      o.result.failures.push_back({"relu", etas[i], errors[i]});
      continue;
    }
    const auto& r = *runs[i];
    const double b = r.final_params.b;
    out.row({etas[i], etas[i] / threshold, r.iters.back(), b, r.A.back(), r.loss.back(),
             r.test_acc.back(), r.max_sign_alternations});
    if (b <= -cfg.bias_level && (!knee || etas[i] < *knee)) knee = etas[i];
  }
  out.close();
  if (knee) o.result.metrics.emplace_back("knee_over_threshold", *knee / threshold);
  o.plot_x = "eta";
  o.plot_y = "b_final";
  o.plot_log_y = false;
}

void run_relu_vs_mm(const SweepConfig& cfg, Outputs& o) {
  const auto etas = parse_grid(cfg.grid);
  const auto ds = relu_net::generate_dataset(cfg.d, cfg.n, cfg.lambda, cfg.seed);
  const auto p0 = relu_net::default_init(cfg.d, cfg.seed);

  std::vector<std::optional<relu_net::ComparisonReport>> reports(etas.size());
  std::vector<std::string> errors(etas.size());
  parallel_for(etas.size(), cfg.parallelism, [&](std::size_t i) {
    try {
      reports[i] = relu_net::compare_to_mean_model(ds, p0, etas[i],
                                                   budget_iters(cfg.time_budget, etas[i]));
    } catch (const EosError& e) {
      errors[i] = e.what();
    }
  });

  csv::Writer out(o.result.csv_path,
                  {"eta", "compared", "reached_bias_level", "max_b_dev", "max_A_dev"});
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!reports[i]) {
      o.result.failures.push_back({"relu-vs-mm", etas[i], errors[i]});
      continue;
    }
    const auto& r = *reports[i];
    out.row({etas[i], r.compared, r.reached_bias_level ? 1 : 0, r.max_b_dev, r.max_A_dev});
    Check check;
    check.name = "max |b_net - b_mm| <= " + csv::format_double(cfg.b_tolerance) +
                 " at eta=" + csv::format_double(etas[i]);
    check.pass = r.max_b_dev <= cfg.b_tolerance;
    check.detail = "max deviation " + csv::format_double(r.max_b_dev) + " over " +
                   std::to_string(r.compared) + " iterations";
    o.result.checks.push_back(check);
  }
  out.close();
  o.plot_x = "eta";
  o.plot_y = "max_b_dev";
}

}  // namespace

std::string_view version() { return EOS_VERSION_STRING; }

std::vector<double> parse_grid(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw EosError(ErrorCode::InvalidArgument, "grid must look like log:lo:hi:n, lin:lo:hi:n or list:...");
  }
  const auto kind = spec.substr(0, colon);
  const auto rest = spec.substr(colon + 1);
  std::vector<double> grid;
  if (kind == "list") {
    for (auto item : split(rest, ',')) grid.push_back(parse_number(item, "grid value"));
  } else if (kind == "log" || kind == "lin") {
    const auto parts = split(rest, ':');
    if (parts.size() != 3) {
      throw EosError(ErrorCode::InvalidArgument, "range grid needs lo:hi:n, got " + std::string(spec));
    }
    const double lo = parse_number(parts[0], "grid lower bound");
    const double hi = parse_number(parts[1], "grid upper bound");
    const double count = parse_number(parts[2], "grid size");
    if (!(count >= 1.0) || count != std::floor(count)) {
      throw EosError(ErrorCode::InvalidArgument, "grid size must be a positive integer");
    }
    const auto n = static_cast<std::size_t>(count);
    if (n > 1 && !(lo < hi)) throw EosError(ErrorCode::InvalidArgument, "grid needs lo < hi");
    if (kind == "log" && !(lo > 0.0)) {
      throw EosError(ErrorCode::InvalidArgument, "log grid needs lo > 0");
    }
    grid.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double u = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
      grid[k] = kind == "log" ? std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)))
                              : lo + u * (hi - lo);
    }
    grid.front() = lo;
    if (n > 1) grid.back() = hi;
  } else {
    throw EosError(ErrorCode::InvalidArgument, "unknown grid kind '" + std::string(kind) + "'");
  }
  for (double v : grid) {
    if (!std::isfinite(v)) throw EosError(ErrorCode::InvalidArgument, "grid values must be finite");
  }
  if (grid.empty()) throw EosError(ErrorCode::InvalidArgument, "grid is empty");
  return grid;
}

ScalingFit fit_power_law(std::span<const double> xs, std::span<const double> ys,
                         double predicted_slope, double tolerance, std::optional<double> x_max) {
  if (xs.size() != ys.size()) {
    throw EosError(ErrorCode::InvalidArgument, "fit_power_law needs equally long inputs");
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (x_max && !(xs[i] < *x_max)) continue;
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
      throw EosError(ErrorCode::InvalidArgument, "fit_power_law needs positive data");
    }
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  if (lx.size() < 8) {
    throw EosError(ErrorCode::DegenerateFit,
                   "need at least 8 points, have " + std::to_string(lx.size()));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw EosError(ErrorCode::DegenerateFit, "all x values are equal");

  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += e * e;
  }
  // Spread at rounding level counts as a constant series.
  double scale = 0.0;
  for (double v : ly) scale = std::max(scale, std::fabs(v));
  const double noise = 8.0 * std::numeric_limits<double>::epsilon() * scale;
  fit.r_squared = syy <= n * noise * noise ? 1.0 : 1.0 - ss_res / syy;
  fit.predicted_slope = predicted_slope;
  fit.tolerance = tolerance;
  fit.points = lx.size();
  fit.pass = std::fabs(fit.slope - predicted_slope) <= tolerance && fit.r_squared >= kMinRSquared;
  return fit;
}

double parse_init_mode(std::string_view mode) {
  constexpr std::string_view prefix = "fixed-delta:";
  if (!mode.starts_with(prefix)) {
    throw EosError(ErrorCode::InvalidArgument, "init mode must be fixed-delta:<delta>");
  }
  const double delta = parse_number(mode.substr(prefix.size()), "delta");
  if (!(delta > -2.0)) throw EosError(ErrorCode::InvalidArgument, "fixed-delta needs delta > -2");
  return delta;
}

std::vector<SnSweepRow> single_neuron_sweep(const LossSpec& loss, std::span<const double> etas,
                                            double delta, const single_neuron::StopRule& stop,
                                            int workers) {
  std::vector<SnSweepRow> rows(etas.size());
  parallel_for(etas.size(), workers, [&](std::size_t i) {
    SnSweepRow& row = rows[i];
    row.eta = etas[i];
    try {
      const auto init = single_neuron::scaled_init(delta, etas[i]);
      const auto traj = single_neuron::run(init.x, init.y, loss, etas[i], stop);
      row.status = traj.status;
      row.final_iter = traj.final_iter;
      row.y_inf_sq = traj.final_state.y * traj.final_state.y;
      row.limiting_sharpness = traj.converged() ? single_neuron::limiting_sharpness(traj)
                                                : std::numeric_limits<double>::quiet_NaN();
      row.gap = 2.0 / etas[i] - row.y_inf_sq;
      row.bounce_iters = traj.band_count;
      row.crossing_iter = traj.crossing_iter;
    } catch (const EosError& e) {
      row.error = e.what();
    }
  });
  return rows;
}

double predicted_bounce_slope(double beta) { return -std::max(beta / (beta - 1.0), 2.0); }

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::SingleNeuronGapScaling: return "single-neuron-gap";
    case Experiment::SingleNeuronBounceCount: return "single-neuron-bounce";
    case Experiment::MeanModelPhase: return "mean-model-phase";
    case Experiment::ReluPhase: return "relu-phase";
    case Experiment::ReluVsMeanModel: return "relu-vs-mean-model";
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view name) {
  for (auto e : {Experiment::SingleNeuronGapScaling, Experiment::SingleNeuronBounceCount,
                 Experiment::MeanModelPhase, Experiment::ReluPhase, Experiment::ReluVsMeanModel}) {
    if (name == to_string(e)) return e;
  }
  throw EosError(ErrorCode::InvalidArgument, "unknown experiment '" + std::string(name) + "'");
}

void SweepConfig::validate() const {
  auto bad = [](const std::string& msg) { throw EosError(ErrorCode::InvalidArgument, msg); };
  parse_grid(grid);
  for (const auto& s : series) {
    LossSpec::parse(s.loss);
    if (!s.grid.empty()) parse_grid(s.grid);
  }
  if ((experiment == Experiment::SingleNeuronGapScaling ||
       experiment == Experiment::SingleNeuronBounceCount) &&
      series.empty()) {
    bad("single-neuron experiments need at least one loss series");
  }
  if (parallelism < 1) bad("parallelism must be >= 1");
  if (seeds < 1) bad("seeds must be >= 1");
  if (out_path.empty()) bad("output path is empty");
  if (max_iters < 1) bad("max_iters must be >= 1");
  if (!(tol_x > 0.0)) bad("tol_x must be > 0");
  if (!(delta > -2.0)) bad("delta must be > -2");
  if (d < 1 || n < 1) bad("d and n must be >= 1");
  if (!(lambda > 1.0)) bad("lambda must be > 1");
  if (!(time_budget > 0.0)) bad("time_budget must be > 0");
  if (A0 && *A0 == 0.0) bad("A0 must be nonzero");
}

SweepConfig default_config(Experiment e) {
  SweepConfig cfg;
  cfg.experiment = e;
  switch (e) {
    case Experiment::SingleNeuronGapScaling:
      for (const char* b : {"3/2", "2", "3", "10"}) cfg.series.push_back({std::string("higher-order:") + b, ""});
      cfg.fit_x_max = std::exp(-2.0);
      cfg.slope_tolerance = 0.15;
      break;
    case Experiment::SingleNeuronBounceCount:
      for (const char* b : {"4/3", "3/2", "2", "4"}) cfg.series.push_back({std::string("higher-order:") + b, ""});
      cfg.fit_x_max = std::exp(-2.0);
      cfg.slope_tolerance = 0.2;
      break;
    case Experiment::MeanModelPhase:
      cfg.grid = "log:4e-4:1e-3:41";
      cfg.max_iters = 10'000'000;
      break;
    case Experiment::ReluPhase:
      cfg.grid = "log:2.5e-4:2.5e-3:11";
      break;
    case Experiment::ReluVsMeanModel:
      cfg.grid = "list:2.5e-3";
      break;
  }
  return cfg;
}

SweepConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw EosError(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("experiment")) {
    throw EosError(ErrorCode::InvalidArgument, "config must be an object with an 'experiment' key");
  }
  SweepConfig cfg = default_config(parse_experiment(j.at("experiment").get<std::string>()));
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "experiment") continue;
      else if (key == "grid") cfg.grid = value.get<std::string>();
      else if (key == "series") {
        cfg.series.clear();
        for (const auto& s : value) {
          cfg.series.push_back({s.at("loss").get<std::string>(), s.value("grid", std::string())});
        }
      } else if (key == "losses") {
        cfg.series.clear();
        for (const auto& s : value) cfg.series.push_back({s.get<std::string>(), ""});
      }
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "seeds") cfg.seeds = value.get<int>();
      else if (key == "out") cfg.out_path = value.get<std::string>();
      else if (key == "parallelism") cfg.parallelism = value.get<int>();
      else if (key == "emit_plot_script") cfg.emit_plot_script = value.get<bool>();
      else if (key == "delta") cfg.delta = value.get<double>();
      else if (key == "max_iters") cfg.max_iters = value.get<std::int64_t>();
      else if (key == "tol_x") cfg.tol_x = value.get<double>();
      else if (key == "fit_x_max") cfg.fit_x_max = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "slope_tolerance") cfg.slope_tolerance = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "d") cfg.d = value.get<int>();
      else if (key == "n") cfg.n = value.get<int>();
      else if (key == "lambda") cfg.lambda = value.get<double>();
      else if (key == "A0") cfg.A0 = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "time_budget") cfg.time_budget = value.get<double>();
      else if (key == "bias_level") cfg.bias_level = value.get<double>();
      else if (key == "b_tolerance") cfg.b_tolerance = value.get<double>();
      else throw EosError(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw EosError(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json(const SweepConfig& cfg) { return config_json(cfg).dump(2); }

std::string config_hash(const SweepConfig& cfg) {
  json j = config_json(cfg);
  j.erase("out");
  j.erase("parallelism");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

void apply_env_overrides(SweepConfig& cfg) {
  const char* env = std::getenv("EOS_SEED");
  if (!env || !*env) return;
  const std::string_view text(env);
  std::uint64_t seed = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw EosError(ErrorCode::InvalidArgument, "EOS_SEED must be an unsigned integer");
  }
  cfg.seed = seed;
}

bool ExperimentResult::passed() const {
  for (const auto& f : fits)
    if (!f.pass) return false;
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

int ExperimentResult::exit_code() const {
  if (!failures.empty()) return 1;
  return passed() ? 0 : 2;
}

ExperimentResult run_experiment(const SweepConfig& cfg) {
  cfg.validate();
  const std::string stem = stem_of(cfg.out_path);
  Outputs o;
  o.result.csv_path = cfg.out_path;
  o.result.summary_path = stem + ".summary.json";

  switch (cfg.experiment) {
    case Experiment::SingleNeuronGapScaling:
    case Experiment::SingleNeuronBounceCount: run_single_neuron(cfg, o); break;
    case Experiment::MeanModelPhase: run_mean_model_phase(cfg, o); break;
    case Experiment::ReluPhase: run_relu_phase(cfg, o); break;
    case Experiment::ReluVsMeanModel: run_relu_vs_mm(cfg, o); break;
  }
  ExperimentResult& r = o.result;

  json summary{{"schema_version", kSummarySchemaVersion},
               {"version", std::string(version())},
               {"experiment", std::string(to_string(cfg.experiment))},
               {"seed", cfg.seed},
               {"config_hash", config_hash(cfg)},
               {"config", config_json(cfg)},
               {"csv", r.csv_path},
               {"passed", r.passed()},
               {"failures", r.failures.size()}};
  summary["fits"] = json::array();
  for (const auto& f : r.fits) summary["fits"].push_back(fit_to_json(f));
  summary["checks"] = json::array();
  for (const auto& c : r.checks) {
    summary["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  summary["metrics"] = json::object();
  for (const auto& [k, v] : r.metrics) summary["metrics"][k] = v;
  write_text(r.summary_path, summary.dump(2) + "\n");

  if (!r.failures.empty()) {
    r.failure_path = stem + ".failures.json";
    json manifest = json::array();
    for (const auto& f : r.failures) {
      manifest.push_back({{"series", f.series}, {"eta", f.eta}, {"error", f.error}});
    }
    write_text(*r.failure_path, json{{"config_hash", config_hash(cfg)}, {"failures", manifest}}.dump(2) + "\n");
  }
  if (cfg.emit_plot_script) {
    r.plot_path = stem + ".plot.py";
    write_text(*r.plot_path, plot_script(r.csv_path, o.plot_x, o.plot_y, o.plot_group, o.plot_log_y));
  }
  return r;
}

std::string plot_script(const std::string& csv_path, const std::string& x_column,
                        const std::string& y_column, const std::string& group_column, bool log_y) {
  const json args{{"csv", csv_path},
                  {"x", x_column},
                  {"y", y_column},
                  {"group", group_column},
                  {"log_y", log_y}};
  std::ostringstream s;
  s << "#!/usr/bin/env python3\n"
    << "import csv\nimport json\nimport sys\n\n"
    << "import matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n"
    << "ARGS = json.loads(" << json(args.dump()).dump() << ")\n\n"
    << "def main():\n"
    << "    with open(ARGS[\"csv\"], newline=\"\") as fh:\n"
    << "        rows = list(csv.DictReader(fh))\n"
    << "    groups = {}\n"
    << "    for row in rows:\n"
    << "        key = row.get(ARGS[\"group\"], \"\") if ARGS[\"group\"] else \"\"\n"
    << "        groups.setdefault(key, []).append(row)\n"
    << "    fig, ax = plt.subplots(figsize=(6, 4))\n"
    << "    for key, members in groups.items():\n"
    << "        pts = []\n"
    << "        for row in members:\n"
    << "            try:\n"
    << "                x, y = float(row[ARGS[\"x\"]]), float(row[ARGS[\"y\"]])\n"
    << "            except ValueError:\n"
    << "                continue\n"
    << "            if x > 0 and (y > 0 or not ARGS[\"log_y\"]):\n"
    << "                pts.append((x, y))\n"
    << "        if pts:\n"
    << "            xs, ys = zip(*sorted(pts))\n"
    << "            ax.plot(xs, ys, marker=\"o\", ms=3, label=key or None)\n"
    << "    ax.set_xscale(\"log\")\n"
    << "    if ARGS[\"log_y\"]:\n"
    << "        ax.set_yscale(\"log\")\n"
    << "    ax.set_xlabel(ARGS[\"x\"])\n"
    << "    ax.set_ylabel(ARGS[\"y\"])\n"
    << "    if len(groups) > 1:\n"
    << "        ax.legend()\n"
    << "    out = sys.argv[1] if len(sys.argv) > 1 else ARGS[\"csv\"].rsplit(\".\", 1)[0] + \".png\"\n"
    << "    fig.tight_layout()\n"
    << "    fig.savefig(out, dpi=150)\n\n"
    << "if __name__ == \"__main__\":\n"
    << "    main()\n";
  return s.str();
}

}  // namespace eos::harness
