#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eos {

enum class LossKind { RescaledSymLogistic, Sqrt, Huber, HigherOrder, SymLogistic };

/// A convex, even, 1-Lipschitz loss l(s) with closed-form derivatives and the
/// constants of the local decay condition
///     l'(s)/s <= l''(0) * (1 - c |s|^beta 1{|s| <= c})
/// plus, where known, the matching lower bound l'(s)/s >= l''(0) * (1 - C |s|^beta).
/// beta = +inf means only l'(s)/s <= l''(0) is claimed.
struct LossSpec {
  LossKind kind = LossKind::Sqrt;
  double beta = 2.0;
  double c_lower = 0.4;
  double second_deriv_at_zero = 1.0;
  std::optional<double> c_upper;

  static LossSpec rescaled_sym_logistic();
  static LossSpec sqrt_loss();
  static LossSpec huber();
  static LossSpec higher_order(double beta);
  static LossSpec sym_logistic();

  // Accepts "rsym-logistic", "sqrt", "huber", "higher-order:<beta>", "sym-logistic".
  static LossSpec parse(std::string_view name);
  std::string name() const;
};

// c_beta = (1/(beta+1)) (beta/(beta+1))^beta and r_beta = (beta+1)/beta.
double higher_order_c(double beta);
double higher_order_r(double beta);

double loss_value(const LossSpec& spec, double s);
double loss_deriv(const LossSpec& spec, double s);
// Throws EosError(NotDifferentiable) on the Huber kink |s| = 1.
double loss_second_deriv(const LossSpec& spec, double s);

/// l'(s)/s, continuously extended by l''(0) at s = 0.
double ratio_r(const LossSpec& spec, double s);

struct CertReport {
  std::string loss;
  std::size_t points = 0;
  // Worst (smallest) slack of each clause over the grid; >= 0 means satisfied.
  double lipschitz_margin = 0.0;
  double upper_margin = 0.0;
  std::optional<double> lower_margin;
  double worst_lipschitz_s = 0.0;
  double worst_upper_s = 0.0;
  double worst_lower_s = 0.0;
};

/// Pointwise check of the loss assumptions on a grid in (0, 10]. Ratios are
/// normalised by l''(0) so the sym-logistic loss is certified on the same scale.
/// Throws EosError(CertificationFailed) naming the first violating s and clause.
CertReport certify_assumptions(const LossSpec& spec, std::span<const double> grid);

}  // namespace eos
