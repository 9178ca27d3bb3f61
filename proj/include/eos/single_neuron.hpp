#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "eos/losses.hpp"
#include "eos/numerics.hpp"

namespace eos::single_neuron {

struct State2D {
  double x = 0.0;
  double y = 0.0;
};

/// Per-iterate diagnostics. delta = eta*y^2 - 2 and rho = 2 - eta*y^2, so the
/// iterate is above the stability threshold exactly when delta > 0.
struct StepDiag {
  double s = 0.0;
  double r = 0.0;
  double D = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  double sharp_if_converged = 0.0;
};

// Diagnostic labels only: GradientFlowLike until the first sign change of x,
// Bouncing afterwards while eta*y^2 > 2, Converging once eta*y^2 <= 2.
enum class Phase { GradientFlowLike, Bouncing, Converging };
enum class Regime { GradientFlow, EdgeOfStability };
enum class RunStatus { Converged, MaxItersExceeded, HitAxisExactly };

std::string_view to_string(Phase phase);
std::string_view to_string(Regime regime);
std::string_view to_string(RunStatus status);

struct StopRule {
  double tol_x = 1e-12;
  std::int64_t max_iters = 100'000'000;
  // Store every k-th iterate (1 = all, 0 = only the first and the last).
  std::int64_t record_every = 1;
  // Band [lo/eta, hi/eta] of y^2 counted online for bouncing_iterations.
  double band_lo = 2.0;
  double band_hi = 3.0;
};

struct Trajectory2D {
  double eta = 0.0;
  LossSpec loss;
  StopRule stop;
  std::vector<std::int64_t> iters;
  std::vector<State2D> states;
  std::vector<StepDiag> diags;
  std::vector<Phase> phase_tags;
  // First t >= 1 with eta*y_t^2 < 2 <= eta*y_{t-1}^2.
  std::optional<std::int64_t> crossing_iter;
  // First t with |s_t| below the A2 constant of the loss.
  std::optional<std::int64_t> landing_iter;
  // s at iteration crossing_iter - 1, the last iterate at or above 2/eta.
  std::optional<double> s_before_crossing;
  std::optional<double> y2_at_crossing;
  std::optional<std::int64_t> first_sign_change;
  State2D final_state;
  std::int64_t final_iter = 0;
  RunStatus status = RunStatus::MaxItersExceeded;
  std::int64_t band_count = 0;

  bool fully_recorded() const { return stop.record_every == 1; }
  bool converged() const { return status == RunStatus::Converged; }
};

State2D gd_step(const State2D& state, const LossSpec& loss, double eta);

StepDiag diagnostics(const State2D& state, const LossSpec& loss, double eta);

/// l''(xy) [y x]^T [y x] + l'(xy) [[0,1],[1,0]].
numerics::Mat2 hessian(const State2D& state, const LossSpec& loss);

inline double gf_conserved(const State2D& state) {
  return (state.y - state.x) * (state.y + state.x);
}

/// Right-hand side of the gradient flow (xdot, ydot) = -l'(xy) (y, x).
State2D gradient_flow_rhs(const State2D& state, const LossSpec& loss);

Regime classify_regime(double x0, double y0, double eta);

/// Initial point sqrt((2 + delta)/eta) * (dir_x, dir_y); the flow sharpness of
/// this start is (2 + delta)/eta * (dir_y^2 - dir_x^2).
State2D scaled_init(double delta, double eta, double dir_x = 3.0, double dir_y = 3.1622776601683795);

/// Runs GD until |x_t| < tol_x, x_t hits 0 exactly above the threshold, or
/// max_iters. The returned trajectory carries the status; it is never thrown.
Trajectory2D run(double x0, double y0, const LossSpec& loss, double eta, const StopRule& stop = {});

/// Like run, but if the iterate hits the y-axis exactly while above the
/// threshold, restarts from x0 jittered by +/- epsilon (uniform, RngStream(seed)).
Trajectory2D run_with_perturbation(double x0, double y0, const LossSpec& loss, double eta,
                                   const StopRule& stop, double epsilon, std::uint64_t seed,
                                   int max_restarts = 8);

/// lambda_max of the Hessian at the final state. Throws NotConverged unless
/// the run stopped on the x tolerance.
double limiting_sharpness(const Trajectory2D& traj);

/// Positive root x of eta l'(x y) y = 2 x on (0, y] by bisection, i.e. the
/// amplitude of an exact period-two bounce at height y. Throws NoRoot when
/// l''(0) eta y^2 <= 2 or the bracket has no sign change.
double quasi_static_envelope(const LossSpec& loss, double eta, double y, double abs_tol = 1e-13);

/// Number of iterations with y_t^2 in [lo_mult/eta, hi_mult/eta].
std::int64_t bouncing_iterations(const Trajectory2D& traj, double lo_mult = 2.0, double hi_mult = 3.0);

}  // namespace eos::single_neuron
