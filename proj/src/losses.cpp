#include "eos/losses.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "eos/error.hpp"

namespace eos {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Pointwise slack allowed for rounding when a clause holds with equality.
constexpr double kCertSlack = 1e-14;

double sign(double s) { return s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0); }

}  // namespace

double higher_order_c(double beta) {
  return std::pow(beta / (beta + 1.0), beta) / (beta + 1.0);
}

double higher_order_r(double beta) { return (beta + 1.0) / beta; }

LossSpec LossSpec::rescaled_sym_logistic() {
  return {LossKind::RescaledSymLogistic, 2.0, 0.25, 1.0, 1.0 / 3.0};
}

LossSpec LossSpec::sqrt_loss() { return {LossKind::Sqrt, 2.0, 0.4, 1.0, 0.5}; }

LossSpec LossSpec::huber() { return {LossKind::Huber, kInf, 1.0, 1.0, std::nullopt}; }

LossSpec LossSpec::higher_order(double beta) {
  if (!(beta > 1.0) || !std::isfinite(beta)) {
    throw EosError(ErrorCode::InvalidArgument, "higher-order loss needs finite beta > 1");
  }
  const double c = higher_order_c(beta);
  return {LossKind::HigherOrder, beta, std::min(c, higher_order_r(beta)), 1.0, c};
}

LossSpec LossSpec::sym_logistic() {
  // In units of l''(0) = 1/4: 2 tanh(s/2)/s lies between 1 - s^2/12 and 1 - s^2/16 (|s| <= 1/2).
  return {LossKind::SymLogistic, 2.0, 1.0 / 16.0, 0.25, 1.0 / 12.0};
}

LossSpec LossSpec::parse(std::string_view name) {
  if (name == "rsym-logistic") return rescaled_sym_logistic();
  if (name == "sqrt") return sqrt_loss();
  if (name == "huber") return huber();
  if (name == "sym-logistic") return sym_logistic();
  constexpr std::string_view prefix = "higher-order:";
  if (name.starts_with(prefix)) {
    const std::string text(name.substr(prefix.size()));
    // Accept decimals and simple fractions such as 3/2.
    double beta = 0.0;
    if (const auto slash = text.find('/'); slash != std::string::npos) {
      double num = 0.0, den = 0.0;
      const auto r1 = std::from_chars(text.data(), text.data() + slash, num);
      const auto r2 = std::from_chars(text.data() + slash + 1, text.data() + text.size(), den);
      if (r1.ec != std::errc{} || r2.ec != std::errc{} || r2.ptr != text.data() + text.size() ||
          den == 0.0) {
        throw EosError(ErrorCode::InvalidArgument, "bad beta in loss name: " + std::string(name));
      }
      beta = num / den;
    } else {
      const auto r = std::from_chars(text.data(), text.data() + text.size(), beta);
      if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
        throw EosError(ErrorCode::InvalidArgument, "bad beta in loss name: " + std::string(name));
      }
    }
    return higher_order(beta);
  }
  throw EosError(ErrorCode::InvalidArgument, "unknown loss: " + std::string(name));
}

std::string LossSpec::name() const {
  switch (kind) {
    case LossKind::RescaledSymLogistic: return "rsym-logistic";
    case LossKind::Sqrt: return "sqrt";
    case LossKind::Huber: return "huber";
    case LossKind::SymLogistic: return "sym-logistic";
    case LossKind::HigherOrder: {
      std::ostringstream out;
      out << "higher-order:" << beta;
      return out.str();
    }
  }
  return "unknown";
}

double loss_value(const LossSpec& spec, double s) {
  const double a = std::fabs(s);
  switch (spec.kind) {
    case LossKind::RescaledSymLogistic:
      // (1/2) log(1+e^{2s}) + (1/2) log(1+e^{-2s}) = |s| + log(1 + e^{-2|s|})
      return a + std::log1p(std::exp(-2.0 * a));
    case LossKind::Sqrt:
      return std::sqrt(1.0 + s * s);
    case LossKind::Huber:
      return a <= 1.0 ? 0.5 * s * s : a - 0.5;
    case LossKind::HigherOrder: {
      const double c = higher_order_c(spec.beta);
      const double r = higher_order_r(spec.beta);
      const double inner = [&](double u) {
        return 0.5 * u * u - c * std::pow(u, spec.beta + 2.0) / (spec.beta + 2.0);
      }(std::min(a, r));
      return a < r ? inner : inner + (a - r);
    }
    case LossKind::SymLogistic:
      return 0.5 * a + std::log1p(std::exp(-a));
  }
  return 0.0;
}

double loss_deriv(const LossSpec& spec, double s) {
  switch (spec.kind) {
    case LossKind::RescaledSymLogistic:
      return std::tanh(s);
    case LossKind::Sqrt:
      return s / std::sqrt(1.0 + s * s);
    case LossKind::Huber:
      return std::clamp(s, -1.0, 1.0);
    case LossKind::HigherOrder: {
      const double a = std::fabs(s);
      const double r = higher_order_r(spec.beta);
      if (a >= r) return sign(s);
      const double c = spec.c_upper ? *spec.c_upper : higher_order_c(spec.beta);
      return s * (1.0 - c * std::pow(a, spec.beta));
    }
    case LossKind::SymLogistic:
      // (1/2)(e^s - 1)/(e^s + 1)
      return 0.5 * std::tanh(0.5 * s);
  }
  return 0.0;
}

double loss_second_deriv(const LossSpec& spec, double s) {
  switch (spec.kind) {
    case LossKind::RescaledSymLogistic: {
      const double t = std::tanh(s);
      return 1.0 - t * t;
    }
    case LossKind::Sqrt:
      return std::pow(1.0 + s * s, -1.5);
    case LossKind::Huber: {
      const double a = std::fabs(s);
      if (a == 1.0) {
        throw EosError(ErrorCode::NotDifferentiable, "Huber loss has a kink at |s| = 1");
      }
      return a < 1.0 ? 1.0 : 0.0;
    }
    case LossKind::HigherOrder: {
      // Both branches give 0 at |s| = r_beta.
      const double a = std::fabs(s);
      if (a >= higher_order_r(spec.beta)) return 0.0;
      return 1.0 - higher_order_c(spec.beta) * (spec.beta + 1.0) * std::pow(a, spec.beta);
    }
    case LossKind::SymLogistic: {
      const double t = std::tanh(0.5 * s);
      return 0.25 * (1.0 - t * t);
    }
  }
  return 0.0;
}

double ratio_r(const LossSpec& spec, double s) {
  if (s == 0.0) return spec.second_deriv_at_zero;
  return loss_deriv(spec, s) / s;
}

CertReport certify_assumptions(const LossSpec& spec, std::span<const double> grid) {
  if (grid.empty()) throw EosError(ErrorCode::InvalidArgument, "certification grid is empty");

  CertReport report;
  report.loss = spec.name();
  report.points = grid.size();
  report.lipschitz_margin = kInf;
  report.upper_margin = kInf;
  if (spec.c_upper) report.lower_margin = kInf;

  auto fail = [&](double s, std::string_view clause, double margin) {
    std::ostringstream msg;
    msg << spec.name() << " violates " << clause << " at s=" << s << " (margin " << margin << ")";
    throw EosError(ErrorCode::CertificationFailed, msg.str());
  };

  const double curvature = spec.second_deriv_at_zero;
  for (double s : grid) {
    if (!(s > 0.0) || s > 10.0) {
      throw EosError(ErrorCode::InvalidArgument, "certification grid must lie in (0, 10]");
    }
    const double d = loss_deriv(spec, s);
    const double r = d / s / curvature;

    const double lip = std::min(1.0, s) - std::fabs(d);
    if (lip < report.lipschitz_margin) {
      report.lipschitz_margin = lip;
      report.worst_lipschitz_s = s;
    }
    if (lip < -kCertSlack) fail(s, "|l'(s)| <= min(1, |s|)", lip);

    const double decay = (std::isfinite(spec.beta) && s <= spec.c_lower)
                             ? spec.c_lower * std::pow(s, spec.beta)
                             : 0.0;
    const double upper = (1.0 - decay) - r;
    if (upper < report.upper_margin) {
      report.upper_margin = upper;
      report.worst_upper_s = s;
    }
    if (upper < -kCertSlack) fail(s, "l'(s)/s <= 1 - c|s|^beta 1{|s|<=c}", upper);

    if (spec.c_upper && std::isfinite(spec.beta)) {
      const double lower = r - (1.0 - *spec.c_upper * std::pow(s, spec.beta));
      if (lower < *report.lower_margin) {
        report.lower_margin = lower;
        report.worst_lower_s = s;
      }
      if (lower < -kCertSlack) fail(s, "l'(s)/s >= 1 - C|s|^beta", lower);
    }
  }
  return report;
}

}  // namespace eos
