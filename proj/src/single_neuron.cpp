#include "eos/single_neuron.hpp"

#include <cmath>
#include <sstream>

#include "eos/error.hpp"

namespace eos::single_neuron {

namespace {

constexpr double kOverflow = 1e300;

void check_finite_state(const State2D& st, std::int64_t t) {
  if (!(std::fabs(st.x) <= kOverflow) || !(std::fabs(st.y) <= kOverflow)) {
    std::ostringstream msg;
    msg << "iterate left the representable range at t=" << t << " (x=" << st.x << ", y=" << st.y
        << ")";
    throw EosError(ErrorCode::NumericOverflow, msg.str());
  }
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::GradientFlowLike: return "gradient-flow";
    case Phase::Bouncing: return "bouncing";
    case Phase::Converging: return "converging";
  }
  return "unknown";
}

std::string_view to_string(Regime regime) {
  return regime == Regime::GradientFlow ? "gradient-flow" : "edge-of-stability";
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxItersExceeded: return "max-iters-exceeded";
    case RunStatus::HitAxisExactly: return "hit-axis-exactly";
  }
  return "unknown";
}

State2D gd_step(const State2D& state, const LossSpec& loss, double eta) {
  const double g = loss_deriv(loss, state.x * state.y);
  State2D next{state.x - eta * g * state.y, state.y - eta * g * state.x};
  if (!(std::fabs(next.x) <= kOverflow) || !(std::fabs(next.y) <= kOverflow)) {
    throw EosError(ErrorCode::NumericOverflow, "gd_step produced a non-finite or huge iterate");
  }
  return next;
}

StepDiag diagnostics(const State2D& state, const LossSpec& loss, double eta) {
  StepDiag diag;
  diag.s = state.x * state.y;
  diag.r = ratio_r(loss, diag.s);
  diag.D = gf_conserved(state);
  diag.sharp_if_converged = loss.second_deriv_at_zero * state.y * state.y;
  diag.delta = eta * diag.sharp_if_converged - 2.0;
  diag.rho = -diag.delta;
  return diag;
}

numerics::Mat2 hessian(const State2D& state, const LossSpec& loss) {
  const double s = state.x * state.y;
  const double l2 = loss_second_deriv(loss, s);
  const double l1 = loss_deriv(loss, s);
  return {{{l2 * state.y * state.y, l2 * state.x * state.y + l1},
           {l2 * state.x * state.y + l1, l2 * state.x * state.x}}};
}

State2D gradient_flow_rhs(const State2D& state, const LossSpec& loss) {
  const double g = loss_deriv(loss, state.x * state.y);
  return {-g * state.y, -g * state.x};
}

Regime classify_regime(double x0, double y0, double eta) {
  if (!(eta > 0.0) || !std::isfinite(x0) || !std::isfinite(y0)) {
    throw EosError(ErrorCode::InvalidArgument, "classify_regime needs finite inputs and eta > 0");
  }
  if (std::fabs(x0) == y0) {
    throw EosError(ErrorCode::OnInvariantLine, "initialisation lies on the invariant line y = |x|");
  }
  if (!(y0 > std::fabs(x0) && x0 != 0.0)) {
    throw EosError(ErrorCode::InvalidArgument, "classify_regime expects y0 > |x0| > 0");
  }
  // The tie y0^2 - x0^2 == 2/eta counts as edge of stability.
  return (y0 - x0) * (y0 + x0) < 2.0 / eta ? Regime::GradientFlow : Regime::EdgeOfStability;
}

State2D scaled_init(double delta, double eta, double dir_x, double dir_y) {
  if (!(eta > 0.0) || !(2.0 + delta > 0.0)) {
    throw EosError(ErrorCode::InvalidArgument, "scaled_init needs eta > 0 and delta > -2");
  }
  const double scale = std::sqrt((2.0 + delta) / eta);
  return {scale * dir_x, scale * dir_y};
}

Trajectory2D run(double x0, double y0, const LossSpec& loss, double eta, const StopRule& stop) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw EosError(ErrorCode::InvalidArgument, "step size must be positive and finite");
  }
  if (!std::isfinite(x0) || !std::isfinite(y0)) {
    throw EosError(ErrorCode::InvalidArgument, "initial point must be finite");
  }
  if (!(stop.tol_x > 0.0) || stop.max_iters < 0 || stop.record_every < 0) {
    throw EosError(ErrorCode::InvalidArgument, "invalid stop rule");
  }

  Trajectory2D traj;
  traj.eta = eta;
  traj.loss = loss;
  traj.stop = stop;

  const double curvature_eta = eta * loss.second_deriv_at_zero;
  const double band_lo = stop.band_lo / eta;
  const double band_hi = stop.band_hi / eta;

  State2D st{x0, y0};
  double prev_scaled = curvature_eta * y0 * y0;
  double prev_s = x0 * y0;
  double prev_x = x0;
  bool sign_changed = false;

  auto record = [&](std::int64_t t, const State2D& state) {
    traj.iters.push_back(t);
    traj.states.push_back(state);
    const StepDiag diag = diagnostics(state, loss, eta);
    traj.diags.push_back(diag);
    if (diag.delta <= 0.0) {
      traj.phase_tags.push_back(Phase::Converging);
    } else {
      traj.phase_tags.push_back(sign_changed ? Phase::Bouncing : Phase::GradientFlowLike);
    }
  };

  for (std::int64_t t = 0;; ++t) {
    const double s = st.x * st.y;
    const double y2 = st.y * st.y;
    const double scaled = curvature_eta * y2;

    if (t >= 1) {
      if (!traj.crossing_iter && scaled < 2.0 && prev_scaled >= 2.0) {
        traj.crossing_iter = t;
        traj.s_before_crossing = prev_s;
        traj.y2_at_crossing = y2;
      }
      if (!sign_changed && ((st.x < 0.0 && prev_x > 0.0) || (st.x > 0.0 && prev_x < 0.0))) {
        sign_changed = true;
        traj.first_sign_change = t;
      }
    }
    if (!traj.landing_iter && std::fabs(s) < loss.c_lower) traj.landing_iter = t;
    if (y2 >= band_lo && y2 <= band_hi) ++traj.band_count;

    const bool hit_axis = t >= 1 && st.x == 0.0 && scaled > 2.0;
    const bool converged = !hit_axis && std::fabs(st.x) < stop.tol_x;
    const bool out_of_budget = t >= stop.max_iters;
    const bool last = hit_axis || converged || out_of_budget;

    if (t == 0 || last || (stop.record_every > 0 && t % stop.record_every == 0)) record(t, st);

    if (last) {
      traj.final_state = st;
      traj.final_iter = t;
      traj.status = hit_axis ? RunStatus::HitAxisExactly
                             : (converged ? RunStatus::Converged : RunStatus::MaxItersExceeded);
      break;
    }

    const double g = loss_deriv(loss, s);
    const State2D next{st.x - eta * g * st.y, st.y - eta * g * st.x};
    prev_scaled = scaled;
    prev_s = s;
    prev_x = st.x;
    st = next;
    check_finite_state(st, t + 1);
  }
  return traj;
}

Trajectory2D run_with_perturbation(double x0, double y0, const LossSpec& loss, double eta,
                                   const StopRule& stop, double epsilon, std::uint64_t seed,
                                   int max_restarts) {
  Trajectory2D traj = run(x0, y0, loss, eta, stop);
  numerics::RngStream rng(seed);
  for (int k = 0; k < max_restarts && traj.status == RunStatus::HitAxisExactly; ++k) {
    const double jitter = epsilon * (2.0 * rng.uniform() - 1.0);
    traj = run(x0 + jitter, y0, loss, eta, stop);
  }
  return traj;
}

double limiting_sharpness(const Trajectory2D& traj) {
  if (!traj.converged()) {
    std::ostringstream msg;
    msg << "run ended with status " << to_string(traj.status) << " at t=" << traj.final_iter;
    throw EosError(ErrorCode::NotConverged, msg.str());
  }
  return numerics::sym_eig_max(hessian(traj.final_state, traj.loss));
}

double quasi_static_envelope(const LossSpec& loss, double eta, double y, double abs_tol) {
  const double scaled = eta * y * y;
  if (!(y > 0.0) || !(scaled * loss.second_deriv_at_zero > 2.0)) {
    throw EosError(ErrorCode::NoRoot, "bouncing envelope exists only above the stability threshold");
  }
  // eta l'(xy) y - 2x = x (eta y^2 r(xy) - 2) for x > 0; bisect on the bracket factor.
  auto excess = [&](double x) { return scaled * ratio_r(loss, x * y) - 2.0; };
  double lo = 0.0;
  double hi = y;
  if (excess(hi) >= 0.0) {
    throw EosError(ErrorCode::NoRoot, "no sign change of the envelope equation on (0, y]");
  }
  while (hi - lo > abs_tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::int64_t bouncing_iterations(const Trajectory2D& traj, double lo_mult, double hi_mult) {
  if (!(lo_mult < hi_mult)) {
    throw EosError(ErrorCode::InvalidArgument, "band needs lo_mult < hi_mult");
  }
  if (traj.fully_recorded()) {
    const double lo = lo_mult / traj.eta;
    const double hi = hi_mult / traj.eta;
    std::int64_t count = 0;
    for (const auto& st : traj.states) {
      const double y2 = st.y * st.y;
      if (y2 >= lo && y2 <= hi) ++count;
    }
    return count;
  }
  if (lo_mult == traj.stop.band_lo && hi_mult == traj.stop.band_hi) return traj.band_count;
  throw EosError(ErrorCode::InsufficientRecording,
                 "trajectory was thinned; only the band counted online is available");
}

}  // namespace eos::single_neuron
