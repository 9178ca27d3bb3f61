#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "eos/losses.hpp"

namespace eos::mean_model {

// g(b) = E[ReLU(z + b)], z ~ N(0,1), which equals phi(b) + b Phi(b).
double smoothed_relu(double b);
// g'(b) = Phi(b).
double smoothed_relu_deriv(double b);
// g/g', evaluated through erfcx so it stays accurate for very negative b.
double kappa_integrand(double b);
// Unique b with g(b) = v, by bisection to 1e-13. Throws NonPositiveTarget for v <= 0.
double smoothed_relu_inverse(double v);

// kappa(b) = int_0^b g(u)/Phi(u) du by adaptive quadrature (tol 1e-12), b in [-10, 10].
double kappa(double b);

/// Memoized kappa on [-10, 0] with step 1e-3 and cubic Hermite interpolation
/// (node slopes are the exact integrand). Outside the table it falls back to
/// kappa(). Immutable after construction, so one instance is shared freely.
class KappaTable {
 public:
  static constexpr double kLo = -10.0;
  static constexpr double kStep = 1e-3;

  KappaTable();
  double operator()(double b) const;

  static const KappaTable& shared();

 private:
  std::vector<double> values_;
  std::vector<double> slopes_;
};

struct MeanModelState {
  double A = 0.0;
  double b = 0.0;
};

struct MeanModelConfig {
  int d = 200;
  double eta = 2.5e-3;
  LossSpec loss = LossSpec::sym_logistic();
  double A0 = 1.0;
  double b0 = 0.0;

  // 8 pi / d^2.
  double threshold() const;
  double eta_ratio() const { return eta / threshold(); }
  // With eta = (8 - delta) pi / d^2 and 0 < delta < 8:
  // gamma = min{delta, 8 - delta, (8 - delta)/|A0|} / 200. Empty otherwise.
  std::optional<double> gamma() const;
  // Throws InvalidArgument unless d >= 1, eta > 0, A0 != 0 and the loss is sym-logistic.
  void validate() const;
  bool b0_is_zero_start() const { return b0 == 0.0; }
};

MeanModelState mm_step(const MeanModelState& state, const MeanModelConfig& cfg);

// 1/2 A^2 - 2 d^2 kappa(b); kappa comes from the shared table on [-10, 0].
double mm_conserved(const MeanModelState& state, const MeanModelConfig& cfg);

// (Adot, bdot) of the continuous-time limit of mm_step.
MeanModelState mm_flow_rhs(const MeanModelState& state, const MeanModelConfig& cfg);

// 1/2 d^2 g(b)^2.
double mm_minimizer_sharpness(double b, int d);

enum class MmStatus { Converged, BiasStalled, MaxItersExceeded, HitAxisExactly };
std::string_view to_string(MmStatus status);

struct MmStopRule {
  double tol_A = 1e-12;
  std::int64_t max_iters = 10'000'000;
  std::int64_t record_every = 1;
  // Stop when |b_t - b_{t-window}| <= stall_rel * |b_t|.
  std::int64_t stall_window = 10'000;
  double stall_rel = 1e-15;
};

struct MeanModelTrajectory {
  MeanModelConfig cfg;
  std::optional<double> gamma;
  std::vector<std::int64_t> iters;
  std::vector<double> A;
  std::vector<double> b;
  std::vector<double> sharp_proxy;
  // First t with 1/2 d^2 g(b_t)^2 < 2/eta.
  std::optional<std::int64_t> crossing_iter;
  // Longest run of consecutive sign flips A_t -> A_{t+1}, counted over all iterations.
  std::int64_t max_sign_alternations = 0;
  MeanModelState final_state;
  std::int64_t final_iter = 0;
  MmStatus status = MmStatus::MaxItersExceeded;

  double b_inf() const { return final_state.b; }
  bool finished() const { return status == MmStatus::Converged || status == MmStatus::BiasStalled; }
};

MeanModelTrajectory mm_run(const MeanModelConfig& cfg, const MmStopRule& stop = {});

enum class MmRegime { SmallBias, ThresholdNeuron, Unclassified };
std::string_view to_string(MmRegime regime);

struct SweepPoint {
  double eta = 0.0;
  double eta_over_threshold = 0.0;
  double b_inf = 0.0;
  MmRegime regime = MmRegime::Unclassified;
  MmStatus status = MmStatus::MaxItersExceeded;
  std::int64_t iters = 0;
};

struct SweepResult {
  int d = 0;
  double A0 = 0.0;
  double bias_level = 0.0;
  std::vector<SweepPoint> points;
  // Smallest grid eta whose run ended with b_inf <= -bias_level.
  std::optional<double> transition_eta;
};

// ThresholdNeuron: eta above 8 pi/d^2 and b_inf <= g^{-1}(2/sqrt(eta d^2)) + 1e-9.
// SmallBias: gamma is defined and |b_inf| <= (eta/gamma)|A0|.
MmRegime classify(const MeanModelConfig& cfg, double b_inf);

/// Runs mm_run at each eta (grid order is kept in the result) and reports the
/// first eta, in ascending order, where the limiting bias drops to -bias_level.
SweepResult phase_transition_sweep(int d, double A0, std::span<const double> eta_grid,
                                   double bias_level = 0.01, const MmStopRule& stop = {},
                                   int workers = 1);

}  // namespace eos::mean_model
