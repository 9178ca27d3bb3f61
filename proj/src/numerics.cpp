#include "eos/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "eos/error.hpp"

namespace eos {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::CertificationFailed: return "CertificationFailed";
    case ErrorCode::NumericOverflow: return "NumericOverflow";
    case ErrorCode::NotDifferentiable: return "NotDifferentiable";
    case ErrorCode::OnInvariantLine: return "OnInvariantLine";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::NonPositiveTarget: return "NonPositiveTarget";
    case ErrorCode::KinkEncountered: return "KinkEncountered";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::InsufficientRecording: return "InsufficientRecording";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace eos

namespace eos::numerics {

namespace {

enum class ErfKind { Erf, Erfc, Erfcx };

// Coefficients from Cody's CALERF (netlib specfun/erf).
constexpr double kA[5] = {3.16112374387056560e00, 1.13864154151050156e02,
                          3.77485237685302021e02, 3.20937758913846947e03,
                          1.85777706184603153e-1};
constexpr double kB[4] = {2.36012909523441209e01, 2.44024637934444173e02,
                          1.28261652607737228e03, 2.84423683343917062e03};
constexpr double kC[9] = {5.64188496988670089e-1, 8.88314979438837594e00,
                          6.61191906371416295e01, 2.98635138197400131e02,
                          8.81952221241769090e02, 1.71204761263407058e03,
                          2.05107837782607147e03, 1.23033935479799725e03,
                          2.15311535474403846e-8};
constexpr double kD[8] = {1.57449261107098347e01, 1.17693950891312499e02,
                          5.37181101862009858e02, 1.62138957456669019e03,
                          3.29079923573345963e03, 4.36261909014324716e03,
                          3.43936767414372164e03, 1.23033935480374942e03};
constexpr double kP[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                          1.25781726111229246e-1, 1.60837851487422766e-2,
                          6.58749161529837803e-4, 1.63153871373020978e-2};
constexpr double kQ[5] = {2.56852019228982242e00, 1.87295284992346047e00,
                          5.27905102951428412e-1, 6.05183413124413191e-2,
                          2.33520497626869185e-3};

constexpr double kSqrtPiInv = 5.6418958354775628695e-1;
constexpr double kThresh = 0.46875;
constexpr double kXsmall = 1.11e-16;
constexpr double kXbig = 26.543;
constexpr double kXhuge = 6.71e7;
constexpr double kXmax = 2.53e307;
constexpr double kXneg = -26.628;

// exp(-y^2) split as exp(-ysq^2) * exp(-del) with ysq = y rounded down to 1/16,
// which keeps the large exponent exact.
double exp_minus_square(double y) {
  const double ysq = std::trunc(y * 16.0) / 16.0;
  const double del = (y - ysq) * (y + ysq);
  return std::exp(-ysq * ysq) * std::exp(-del);
}

double calerf(double x, ErfKind kind) {
  const double y = std::fabs(x);
  double result = 0.0;

  if (y <= kThresh) {
    const double ysq = y > kXsmall ? y * y : 0.0;
    double xnum = kA[4] * ysq;
    double xden = ysq;
    for (int i = 0; i < 3; ++i) {
      xnum = (xnum + kA[i]) * ysq;
      xden = (xden + kB[i]) * ysq;
    }
    result = x * (xnum + kA[3]) / (xden + kB[3]);
    if (kind != ErfKind::Erf) result = 1.0 - result;
    if (kind == ErfKind::Erfcx) result *= std::exp(ysq);
    return result;
  }

  if (y <= 4.0) {
    double xnum = kC[8] * y;
    double xden = y;
    for (int i = 0; i < 7; ++i) {
      xnum = (xnum + kC[i]) * y;
      xden = (xden + kD[i]) * y;
    }
    result = (xnum + kC[7]) / (xden + kD[7]);
    if (kind != ErfKind::Erfcx) result *= exp_minus_square(y);
  } else {
    bool done = false;
    if (y >= kXbig) {
      if (kind != ErfKind::Erfcx || y >= kXmax) {
        result = 0.0;
        done = true;
      } else if (y >= kXhuge) {
        result = kSqrtPiInv / y;
        done = true;
      }
    }
    if (!done) {
      const double ysq = 1.0 / (y * y);
      double xnum = kP[5] * ysq;
      double xden = ysq;
      for (int i = 0; i < 4; ++i) {
        xnum = (xnum + kP[i]) * ysq;
        xden = (xden + kQ[i]) * ysq;
      }
      result = ysq * (xnum + kP[4]) / (xden + kQ[4]);
      result = (kSqrtPiInv - result) / y;
      if (kind != ErfKind::Erfcx) result *= exp_minus_square(y);
    }
  }

  // Fix up negative arguments.
  switch (kind) {
    case ErfKind::Erf:
      result = (0.5 - result) + 0.5;
      if (x < 0.0) result = -result;
      break;
    case ErfKind::Erfc:
      if (x < 0.0) result = 2.0 - result;
      break;
    case ErfKind::Erfcx:
      if (x < 0.0) {
        if (x < kXneg) {
          result = std::numeric_limits<double>::max();
        } else {
          const double ysq = std::trunc(x * 16.0) / 16.0;
          const double del = (x - ysq) * (x + ysq);
          result = std::exp(ysq * ysq) * std::exp(del) * 2.0 - result;
        }
      }
      break;
  }
  return result;
}

double simpson_step(const std::function<double(double)>& f, double a, double fa, double b,
                    double fb, double whole, double fm, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  if (depth <= 0 || !(a < lm && lm < m && m < rm && rm < b)) {
    std::ostringstream msg;
    msg << "adaptive Simpson could not resolve [" << a << ", " << b << "]";
    throw EosError(ErrorCode::NonConvergence, msg.str());
  }
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, left, flm, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, right, frm, 0.5 * tol, depth - 1);
}

}  // namespace

double erf(double x) { return calerf(x, ErfKind::Erf); }
double erfc(double x) { return calerf(x, ErfKind::Erfc); }
double erfcx(double x) { return calerf(x, ErfKind::Erfcx); }

double std_normal_pdf(double b) { return kInvSqrt2Pi * std::exp(-0.5 * b * b); }

double std_normal_cdf(double b) {
  // Phi(b) = erfc(-b/sqrt(2)) / 2; the erfc branch keeps the lower tail relative-accurate.
  return 0.5 * erfc(-b * std::numbers::sqrt2 * 0.5);
}

double adaptive_quadrature(const std::function<double(double)>& f, double lo, double hi,
                           double tol, int max_depth) {
  if (!(tol > 0.0) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw EosError(ErrorCode::InvalidArgument, "adaptive_quadrature needs finite bounds and tol > 0");
  }
  if (lo == hi) return 0.0;
  if (lo > hi) return -adaptive_quadrature(f, hi, lo, tol, max_depth);
  const double fa = f(lo);
  const double fb = f(hi);
  const double m = 0.5 * (lo + hi);
  const double fm = f(m);
  const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, lo, fa, hi, fb, whole, fm, tol, max_depth);
}

namespace {

template <std::size_t N>
void check_symmetric(const std::array<std::array<double, N>, N>& m) {
  double scale = 1.0;
  for (const auto& row : m)
    for (double v : row) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      if (!(std::fabs(m[i][j] - m[j][i]) <= 1e-12 * scale)) {
        std::ostringstream msg;
        msg << "entries (" << i << "," << j << ") differ: " << m[i][j] << " vs " << m[j][i];
        throw EosError(ErrorCode::NotSymmetric, msg.str());
      }
    }
  }
}

}  // namespace

double sym_eig_max(const Mat2& m) {
  check_symmetric(m);
  const double off = 0.5 * (m[0][1] + m[1][0]);
  const double mean = 0.5 * (m[0][0] + m[1][1]);
  const double half_diff = 0.5 * (m[0][0] - m[1][1]);
  return mean + std::hypot(half_diff, off);
}

double sym_eig_max(const Mat3& m) {
  check_symmetric(m);
  const double a01 = 0.5 * (m[0][1] + m[1][0]);
  const double a02 = 0.5 * (m[0][2] + m[2][0]);
  const double a12 = 0.5 * (m[1][2] + m[2][1]);
  const double p1 = a01 * a01 + a02 * a02 + a12 * a12;
  if (p1 == 0.0) return std::max({m[0][0], m[1][1], m[2][2]});

  const double q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
  const double d0 = m[0][0] - q;
  const double d1 = m[1][1] - q;
  const double d2 = m[2][2] - q;
  const double p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  // B = (A - qI) / p, r = det(B) / 2 in [-1, 1].
  const double b00 = d0 / p, b11 = d1 / p, b22 = d2 / p;
  const double b01 = a01 / p, b02 = a02 / p, b12 = a12 / p;
  const double det = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) +
                     b02 * (b01 * b12 - b11 * b02);
  const double r = std::clamp(0.5 * det, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  return q + 2.0 * p * std::cos(phi);
}

std::uint64_t RngStream::next_u64() noexcept {
  ++counter_;
  std::uint64_t z = seed_ + counter_ * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double RngStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) noexcept {
  __extension__ typedef unsigned __int128 u128;
  const u128 wide = static_cast<u128>(next_u64()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

double RngStream::normal() noexcept {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * kPi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

}  // namespace eos::numerics
