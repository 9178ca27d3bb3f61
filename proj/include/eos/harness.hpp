#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eos/losses.hpp"
#include "eos/single_neuron.hpp"

namespace eos::harness {

inline constexpr int kSummarySchemaVersion = 1;

std::string_view version();

// "log:lo:hi:n" (geometric, lo > 0), "lin:lo:hi:n" or "list:v1,v2,...".
// Throws InvalidArgument on malformed or empty grids and on lo >= hi.
std::vector<double> parse_grid(std::string_view spec);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double predicted_slope = 0.0;
  double tolerance = 0.15;
  std::size_t points = 0;
  bool pass = false;
};

inline constexpr double kMinRSquared = 0.98;

/// Least squares of log y on log x over points with x < x_max (all points when
/// x_max is empty). Needs >= 8 points, all positive. pass is
/// |slope - predicted| <= tolerance && r^2 >= 0.98; a constant y has r^2 = 1.
/// Throws DegenerateFit when all x are equal or too few points remain.
ScalingFit fit_power_law(std::span<const double> xs, std::span<const double> ys,
                         double predicted_slope = 0.0, double tolerance = 0.15,
                         std::optional<double> x_max = std::nullopt);

// "fixed-delta:<delta>": start at sqrt((2 + delta)/eta) (3, sqrt 10), so that
// y0^2 - x0^2 = (2 + delta)/eta. delta < 0 starts in the gradient-flow regime.
double parse_init_mode(std::string_view mode);

struct SnSweepRow {
  double eta = 0.0;
  single_neuron::RunStatus status = single_neuron::RunStatus::MaxItersExceeded;
  std::int64_t final_iter = 0;
  double y_inf_sq = 0.0;
  // NaN unless the run converged.
  double limiting_sharpness = 0.0;
  // 2/eta - y_final^2.
  double gap = 0.0;
  std::int64_t bounce_iters = 0;
  std::optional<std::int64_t> crossing_iter;
  std::optional<std::string> error;

  bool ok() const { return !error && status == single_neuron::RunStatus::Converged; }
};

std::vector<SnSweepRow> single_neuron_sweep(const LossSpec& loss, std::span<const double> etas,
                                            double delta, const single_neuron::StopRule& stop,
                                            int workers = 1);

// -max(beta/(beta-1), 2).
double predicted_bounce_slope(double beta);

enum class Experiment {
  SingleNeuronGapScaling,
  SingleNeuronBounceCount,
  MeanModelPhase,
  ReluPhase,
  ReluVsMeanModel,
};

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view name);

struct Series {
  std::string loss;
  std::string grid;
};

struct SweepConfig {
  Experiment experiment = Experiment::SingleNeuronGapScaling;
  std::string grid = "log:1e-4:1e-1:20";
  // Single-neuron experiments: one series per entry; an empty grid uses `grid`.
  std::vector<Series> series;
  std::uint64_t seed = 7;
  int seeds = 1;
  std::string out_path = "experiment.csv";
  int parallelism = 1;
  bool emit_plot_script = false;

  double delta = 1.0;
  std::int64_t max_iters = 200'000'000;
  double tol_x = 1e-12;
  std::optional<double> fit_x_max;
  std::optional<double> slope_tolerance;

  int d = 200;
  int n = 300;
  double lambda = 3.0;
  std::optional<double> A0;
  double time_budget = 10.0;
  double bias_level = 0.01;
  double b_tolerance = 0.1;

  void validate() const;
};

// Defaults per experiment: loss series, fit window (eta < e^-2) and tolerances.
SweepConfig default_config(Experiment e);

SweepConfig config_from_json(std::string_view text);
std::string config_to_json(const SweepConfig& cfg);
// FNV-1a 64 of the canonical JSON form without the output path and the worker
// count (neither changes results), as 16 hex digits.
std::string config_hash(const SweepConfig& cfg);

// EOS_SEED, when set, replaces cfg.seed. Throws InvalidArgument if unparsable.
void apply_env_overrides(SweepConfig& cfg);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct NamedFit {
  std::string series;
  std::optional<ScalingFit> fit;
  std::string note;
  bool pass = false;
};

struct Failure {
  std::string series;
  double eta = 0.0;
  std::string error;
};

struct ExperimentResult {
  std::string csv_path;
  std::string summary_path;
  std::optional<std::string> plot_path;
  std::optional<std::string> failure_path;
  std::vector<NamedFit> fits;
  std::vector<Check> checks;
  std::vector<Failure> failures;
  // Informational scalars such as the detected transition step size.
  std::vector<std::pair<std::string, double>> metrics;

  bool passed() const;
  // 0 all passed, 2 some fit or check failed, 1 some grid point raised.
  int exit_code() const;
};

/// Runs the experiment, writes <out>.csv, <stem>.summary.json and, when points
/// fail, <stem>.failures.json next to it. Output is deterministic given cfg.
ExperimentResult run_experiment(const SweepConfig& cfg);

// Self-contained matplotlib script plotting y_column against x_column (log x axis),
// one line per distinct value of group_column (may be empty).
std::string plot_script(const std::string& csv_path, const std::string& x_column,
                        const std::string& y_column, const std::string& group_column, bool log_y);

}  // namespace eos::harness
