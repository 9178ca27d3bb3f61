#include "eos/mean_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "eos/error.hpp"
#include "eos/numerics.hpp"
#include "eos/parallel.hpp"

namespace eos::mean_model {

namespace {

constexpr double kOverflow = 1e300;
constexpr std::size_t kTableCells = 10'000;

}  // namespace

double smoothed_relu(double b) {
  return numerics::std_normal_pdf(b) + b * numerics::std_normal_cdf(b);
}

double smoothed_relu_deriv(double b) { return numerics::std_normal_cdf(b); }

double kappa_integrand(double b) {
  if (b >= 0.0) return smoothed_relu(b) / numerics::std_normal_cdf(b);
  // phi(b)/Phi(b) = (1/sqrt(2 pi)) / (erfcx(-b/sqrt 2)/2): no underflow in the tail.
  const double mills = numerics::kInvSqrt2Pi / (0.5 * numerics::erfcx(-b / std::numbers::sqrt2));
  return mills + b;
}

double smoothed_relu_inverse(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw EosError(ErrorCode::NonPositiveTarget, "g^{-1} needs a finite target v > 0");
  }
  // g(b) > b, so g(v) > v; walk down until g(lo) < v.
  double hi = v;
  double lo = -1.0;
  while (smoothed_relu(lo) >= v) lo *= 2.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (smoothed_relu(mid) < v ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double kappa(double b) {
  if (!(b >= -10.0 && b <= 10.0)) {
    throw EosError(ErrorCode::InvalidArgument, "kappa is defined here for b in [-10, 10]");
  }
  return numerics::adaptive_quadrature(kappa_integrand, 0.0, b, 1e-12);
}

KappaTable::KappaTable() : values_(kTableCells + 1), slopes_(kTableCells + 1) {
  // Node j sits at b = -j * kStep.
  values_[0] = 0.0;
  slopes_[0] = kappa_integrand(0.0);
  for (std::size_t j = 1; j <= kTableCells; ++j) {
    const double hi = -static_cast<double>(j - 1) * kStep;
    const double lo = -static_cast<double>(j) * kStep;
    values_[j] = values_[j - 1] - numerics::adaptive_quadrature(kappa_integrand, lo, hi, 1e-16);
    slopes_[j] = kappa_integrand(lo);
  }
}

double KappaTable::operator()(double b) const {
  if (b > 0.0 || b < kLo) return kappa(b);
  const double pos = -b / kStep;
  const std::size_t j = std::min(static_cast<std::size_t>(pos), kTableCells - 1);
  const double u = pos - static_cast<double>(j);
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
  const double h10 = u3 - 2.0 * u2 + u;
  const double h01 = -2.0 * u3 + 3.0 * u2;
  const double h11 = u3 - u2;
  // u runs towards more negative b, so d/du = -kStep * d/db.
  return h00 * values_[j] - h10 * kStep * slopes_[j] + h01 * values_[j + 1] -
         h11 * kStep * slopes_[j + 1];
}

const KappaTable& KappaTable::shared() {
  static const KappaTable table;
  return table;
}

double MeanModelConfig::threshold() const {
  return 8.0 * numerics::kPi / (static_cast<double>(d) * static_cast<double>(d));
}

std::optional<double> MeanModelConfig::gamma() const {
  const double delta = 8.0 - eta * static_cast<double>(d) * static_cast<double>(d) / numerics::kPi;
  if (!(delta > 0.0 && delta < 8.0)) return std::nullopt;
  return std::min({delta, 8.0 - delta, (8.0 - delta) / std::fabs(A0)}) / 200.0;
}

void MeanModelConfig::validate() const {
  if (d < 1) throw EosError(ErrorCode::InvalidArgument, "mean model needs d >= 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw EosError(ErrorCode::InvalidArgument, "mean model needs a finite eta > 0");
  }
  if (A0 == 0.0 || !std::isfinite(A0) || !std::isfinite(b0)) {
    throw EosError(ErrorCode::InvalidArgument, "mean model needs a finite A0 != 0 and finite b0");
  }
  if (loss.kind != LossKind::SymLogistic) {
    throw EosError(ErrorCode::InvalidArgument, "mean model is defined for the sym-logistic loss");
  }
}

MeanModelState mm_step(const MeanModelState& state, const MeanModelConfig& cfg) {
  const double d2 = static_cast<double>(cfg.d) * static_cast<double>(cfg.d);
  const double g = smoothed_relu(state.b);
  const double lp = loss_deriv(cfg.loss, state.A * g);
  const MeanModelState next{state.A - 2.0 * d2 * cfg.eta * lp * g,
                            state.b - cfg.eta * lp * state.A * smoothed_relu_deriv(state.b)};
  if (!(std::fabs(next.A) <= kOverflow) || !(std::fabs(next.b) <= kOverflow)) {
    throw EosError(ErrorCode::NumericOverflow, "mean-model iterate overflowed");
  }
  return next;
}

double mm_conserved(const MeanModelState& state, const MeanModelConfig& cfg) {
  const double d2 = static_cast<double>(cfg.d) * static_cast<double>(cfg.d);
  return 0.5 * state.A * state.A - 2.0 * d2 * KappaTable::shared()(state.b);
}

MeanModelState mm_flow_rhs(const MeanModelState& state, const MeanModelConfig& cfg) {
  const double d2 = static_cast<double>(cfg.d) * static_cast<double>(cfg.d);
  const double g = smoothed_relu(state.b);
  const double lp = loss_deriv(cfg.loss, state.A * g);
  return {-2.0 * d2 * lp * g, -lp * state.A * smoothed_relu_deriv(state.b)};
}

double mm_minimizer_sharpness(double b, int d) {
  const double g = smoothed_relu(b);
  return 0.5 * static_cast<double>(d) * static_cast<double>(d) * g * g;
}

std::string_view to_string(MmStatus status) {
  switch (status) {
    case MmStatus::Converged: return "converged";
    case MmStatus::BiasStalled: return "bias-stalled";
    case MmStatus::MaxItersExceeded: return "max-iters-exceeded";
    case MmStatus::HitAxisExactly: return "hit-axis-exactly";
  }
  return "unknown";
}

std::string_view to_string(MmRegime regime) {
  switch (regime) {
    case MmRegime::SmallBias: return "small-bias";
    case MmRegime::ThresholdNeuron: return "threshold-neuron";
    case MmRegime::Unclassified: return "unclassified";
  }
  return "unknown";
}

MeanModelTrajectory mm_run(const MeanModelConfig& cfg, const MmStopRule& stop) {
  cfg.validate();
  if (!(stop.tol_A > 0.0) || stop.max_iters < 0 || stop.record_every < 0 || stop.stall_window < 1) {
    throw EosError(ErrorCode::InvalidArgument, "invalid mean-model stop rule");
  }

  MeanModelTrajectory traj;
  traj.cfg = cfg;
  traj.gamma = cfg.gamma();

  const double limit = 2.0 / cfg.eta;
  MeanModelState st{cfg.A0, cfg.b0};
  double prev_A = cfg.A0;
  double b_checkpoint = cfg.b0;
  std::int64_t alternations = 0;

  for (std::int64_t t = 0;; ++t) {
    const double proxy = mm_minimizer_sharpness(st.b, cfg.d);
    if (!traj.crossing_iter && proxy < limit) traj.crossing_iter = t;
    if (t >= 1) {
      alternations = (st.A * prev_A < 0.0) ? alternations + 1 : 0;
      traj.max_sign_alternations = std::max(traj.max_sign_alternations, alternations);
    }

    const bool hit_axis = t >= 1 && st.A == 0.0 && proxy > limit;
    const bool converged = !hit_axis && std::fabs(st.A) < stop.tol_A;
    bool stalled = false;
    if (t > 0 && t % stop.stall_window == 0) {
      stalled = std::fabs(st.b - b_checkpoint) <= stop.stall_rel * std::fabs(st.b);
      b_checkpoint = st.b;
    }
    const bool out_of_budget = t >= stop.max_iters;
    const bool last = hit_axis || converged || stalled || out_of_budget;

    if (t == 0 || last || (stop.record_every > 0 && t % stop.record_every == 0)) {
      traj.iters.push_back(t);
      traj.A.push_back(st.A);
      traj.b.push_back(st.b);
      traj.sharp_proxy.push_back(proxy);
    }
    if (last) {
      traj.final_state = st;
      traj.final_iter = t;
      if (hit_axis) {
        traj.status = MmStatus::HitAxisExactly;
      } else if (converged) {
        traj.status = MmStatus::Converged;
      } else if (stalled) {
        traj.status = MmStatus::BiasStalled;
      } else {
        traj.status = MmStatus::MaxItersExceeded;
      }
      break;
    }
    prev_A = st.A;
    st = mm_step(st, cfg);
  }
  return traj;
}

MmRegime classify(const MeanModelConfig& cfg, double b_inf) {
  const double d2 = static_cast<double>(cfg.d) * static_cast<double>(cfg.d);
  if (cfg.eta > cfg.threshold() &&
      b_inf <= smoothed_relu_inverse(2.0 / std::sqrt(cfg.eta * d2)) + 1e-9) {
    return MmRegime::ThresholdNeuron;
  }
  if (const auto gamma = cfg.gamma(); gamma && std::fabs(b_inf) <= cfg.eta / *gamma * std::fabs(cfg.A0)) {
    return MmRegime::SmallBias;
  }
  return MmRegime::Unclassified;
}

SweepResult phase_transition_sweep(int d, double A0, std::span<const double> eta_grid,
                                   double bias_level, const MmStopRule& stop, int workers) {
  if (eta_grid.empty()) throw EosError(ErrorCode::InvalidArgument, "empty eta grid");
  SweepResult result;
  result.d = d;
  result.A0 = A0;
  result.bias_level = bias_level;
  result.points.resize(eta_grid.size());

  MmStopRule quiet = stop;
  quiet.record_every = 0;
  KappaTable::shared();
  parallel_for(eta_grid.size(), workers, [&](std::size_t i) {
    MeanModelConfig cfg;
    cfg.d = d;
    cfg.eta = eta_grid[i];
    cfg.A0 = A0;
    const auto traj = mm_run(cfg, quiet);
    auto& p = result.points[i];
    p.eta = cfg.eta;
    p.eta_over_threshold = cfg.eta_ratio();
    p.b_inf = traj.b_inf();
    p.regime = classify(cfg, p.b_inf);
    p.status = traj.status;
    p.iters = traj.final_iter;
  });

  for (const auto& p : result.points) {
    if (p.b_inf <= -bias_level && (!result.transition_eta || p.eta < *result.transition_eta)) {
      result.transition_eta = p.eta;
    }
  }
  return result;
}

}  // namespace eos::mean_model
