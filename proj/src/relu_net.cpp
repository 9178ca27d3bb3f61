#include "eos/relu_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eos/error.hpp"
#include "eos/losses.hpp"
#include "eos/mean_model.hpp"

namespace eos::relu_net {

namespace {

constexpr double kKinkTol = 1e-12;
constexpr double kOverflow = 1e300;

double logistic_loss(double z) {
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double logistic_deriv(double z) { return -1.0 / (1.0 + std::exp(z)); }

double logistic_second_deriv(double z) {
  const double e = std::exp(-std::fabs(z));
  return e / ((1.0 + e) * (1.0 + e));
}

void check_dims(int d, int n) {
  if (d < 1 || n < 1) throw EosError(ErrorCode::InvalidArgument, "dataset needs d, n >= 1");
}

}  // namespace

SparseDataset generate_dataset_unchecked(int d, int n, double lambda, std::uint64_t seed) {
  check_dims(d, n);
  SparseDataset ds;
  ds.d = d;
  ds.n = n;
  ds.lambda = lambda;
  ds.seed = seed;
  ds.xs.resize(static_cast<std::size_t>(d) * static_cast<std::size_t>(n));
  ds.ys.resize(static_cast<std::size_t>(n));
  ds.js.resize(static_cast<std::size_t>(n));
  numerics::RngStream rng(seed);
  for (int i = 0; i < n; ++i) {
    const double y = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(d)));
    double* x = ds.xs.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(d);
    for (int k = 0; k < d; ++k) x[k] = rng.normal();
    x[j] += lambda * y;
    ds.ys[static_cast<std::size_t>(i)] = y;
    ds.js[static_cast<std::size_t>(i)] = j;
  }
  return ds;
}

SparseDataset generate_dataset(int d, int n, double lambda, std::uint64_t seed) {
  if (!(lambda > 1.0) || !std::isfinite(lambda)) {
    throw EosError(ErrorCode::InvalidArgument, "signal strength lambda must be > 1");
  }
  return generate_dataset_unchecked(d, n, lambda, seed);
}

ReluParams default_init(int d, std::uint64_t seed) {
  if (d < 1) throw EosError(ErrorCode::InvalidArgument, "default_init needs d >= 1");
  numerics::RngStream rng(seed + 2);
  const double sd = std::sqrt(0.5 / static_cast<double>(d));
  ReluParams p;
  p.a_minus = sd * rng.normal();
  p.a_plus = sd * rng.normal();
  return p;
}

Features features_direct(std::span<const double> x, double b) {
  Features f;
  for (double v : x) {
    const double um = b - v;
    const double up = v + b;
    if (um > 0.0) {
      f.s_minus += um;
      f.n_minus += 1.0;
    }
    if (up > 0.0) {
      f.s_plus += up;
      f.n_plus += 1.0;
    }
  }
  return f;
}

double network_output(const ReluParams& p, std::span<const double> x) {
  const Features f = features_direct(x, p.b);
  return p.a_minus * f.s_minus + p.a_plus * f.s_plus;
}

Objective::Objective(const SparseDataset& ds)
    : d_(ds.d),
      n_(ds.n),
      ys_(ds.ys),
      sorted_(ds.xs),
      prefix_(static_cast<std::size_t>(ds.n) * static_cast<std::size_t>(ds.d + 1)) {
  check_dims(d_, n_);
  if (ds.xs.size() != static_cast<std::size_t>(d_) * static_cast<std::size_t>(n_) ||
      ds.ys.size() != static_cast<std::size_t>(n_)) {
    throw EosError(ErrorCode::InvalidArgument, "dataset arrays do not match (d, n)");
  }
  const auto du = static_cast<std::size_t>(d_);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_); ++i) {
    double* v = sorted_.data() + i * du;
    std::sort(v, v + du);
    double* pre = prefix_.data() + i * (du + 1);
    pre[0] = 0.0;
    for (std::size_t k = 0; k < du; ++k) pre[k + 1] = pre[k] + v[k];
  }
}

Features Objective::features(int i, double b) const {
  const auto du = static_cast<std::size_t>(d_);
  const double* v = sorted_.data() + static_cast<std::size_t>(i) * du;
  const double* pre = prefix_.data() + static_cast<std::size_t>(i) * (du + 1);
  // Units -x + b are active for x < b, units x + b for x > -b.
  const auto n_minus = static_cast<std::size_t>(std::lower_bound(v, v + du, b) - v);
  const auto first_plus = static_cast<std::size_t>(std::upper_bound(v, v + du, -b) - v);
  const auto n_plus = du - first_plus;
  Features f;
  f.n_minus = static_cast<double>(n_minus);
  f.n_plus = static_cast<double>(n_plus);
  f.s_minus = f.n_minus * b - pre[n_minus];
  f.s_plus = (pre[du] - pre[first_plus]) + f.n_plus * b;
  return f;
}

double Objective::output(int i, const ReluParams& p) const {
  const Features f = features(i, p.b);
  return p.a_minus * f.s_minus + p.a_plus * f.s_plus;
}

LossEval Objective::evaluate(const ReluParams& p, bool with_hessian) const {
  LossEval ev;
  double h00 = 0, h01 = 0, h02 = 0, h11 = 0, h12 = 0, h22 = 0;
  for (int i = 0; i < n_; ++i) {
    const Features f = features(i, p.b);
    const double y = ys_[static_cast<std::size_t>(i)];
    const double z = y * (p.a_minus * f.s_minus + p.a_plus * f.s_plus);
    const double c = logistic_deriv(z) * y;
    const double gb = p.a_minus * f.n_minus + p.a_plus * f.n_plus;
    ev.loss += logistic_loss(z);
    ev.grad[0] += c * f.s_minus;
    ev.grad[1] += c * f.s_plus;
    ev.grad[2] += c * gb;
    if (with_hessian) {
      const double w = logistic_second_deriv(z);
      h00 += w * f.s_minus * f.s_minus;
      h01 += w * f.s_minus * f.s_plus;
      h02 += w * f.s_minus * gb + c * f.n_minus;
      h11 += w * f.s_plus * f.s_plus;
      h12 += w * f.s_plus * gb + c * f.n_plus;
      h22 += w * gb * gb;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n_);
  ev.loss *= inv_n;
  for (double& g : ev.grad) g *= inv_n;
  if (with_hessian) {
    ev.hessian = {{{h00 * inv_n, h01 * inv_n, h02 * inv_n},
                   {h01 * inv_n, h11 * inv_n, h12 * inv_n},
                   {h02 * inv_n, h12 * inv_n, h22 * inv_n}}};
  }
  return ev;
}

double Objective::loss(const ReluParams& p) const { return evaluate(p, false).loss; }

std::array<double, 3> Objective::gradient(const ReluParams& p) const {
  return evaluate(p, false).grad;
}

double Objective::accuracy(const ReluParams& p) const {
  int correct = 0;
  for (int i = 0; i < n_; ++i) {
    if (output(i, p) * ys_[static_cast<std::size_t>(i)] > 0.0) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n_);
}

double Objective::kink_distance(double b) const {
  const auto du = static_cast<std::size_t>(d_);
  double best = std::numeric_limits<double>::infinity();
  auto nearest = [&](const double* v, double target) {
    const double* it = std::lower_bound(v, v + du, target);
    if (it != v + du) best = std::min(best, std::fabs(*it - target));
    if (it != v) best = std::min(best, std::fabs(*(it - 1) - target));
  };
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_); ++i) {
    const double* v = sorted_.data() + i * du;
    nearest(v, b);
    nearest(v, -b);
  }
  return best;
}

double param_hessian_sharpness(const Objective& obj, const ReluParams& p) {
  if (obj.kink_distance(p.b) <= kKinkTol) {
    throw EosError(ErrorCode::KinkEncountered, "a sample sits on a ReLU kink at this bias");
  }
  return numerics::sym_eig_max(obj.evaluate(p, true).hessian);
}

double param_hessian_sharpness(const SparseDataset& ds, const ReluParams& p) {
  return param_hessian_sharpness(Objective(ds), p);
}

ReluTrajectory train_full_batch(const SparseDataset& ds, const ReluParams& p0, double eta,
                                std::int64_t iters, const TrainOptions& opts) {
  if (iters < 1) throw EosError(ErrorCode::InvalidArgument, "train_full_batch needs iters >= 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw EosError(ErrorCode::InvalidArgument, "step size must be positive and finite");
  }
  if (opts.record_every < 1) throw EosError(ErrorCode::InvalidArgument, "record_every must be >= 1");

  const Objective train(ds);
  std::optional<Objective> test;
  if (opts.track_test_accuracy) {
    test.emplace(generate_dataset_unchecked(ds.d, ds.n, ds.lambda, ds.seed + 1));
  }

  ReluTrajectory traj;
  traj.eta = eta;
  const double d = static_cast<double>(ds.d);
  ReluParams p = p0;
  double prev_A = d * (p.a_minus + p.a_plus);
  std::int64_t alternations = 0;

  for (std::int64_t t = 0;; ++t) {
    const double A = d * (p.a_minus + p.a_plus);
    if (t >= 1) {
      alternations = (A * prev_A < 0.0) ? alternations + 1 : 0;
      traj.max_sign_alternations = std::max(traj.max_sign_alternations, alternations);
    }
    const bool record = t % opts.record_every == 0 || t == iters;
    const LossEval ev = train.evaluate(p, record && opts.track_sharpness);
    if (record) {
      traj.iters.push_back(t);
      traj.params.push_back(p);
      traj.A.push_back(A);
      traj.loss.push_back(ev.loss);
      traj.sharpness.push_back(opts.track_sharpness ? numerics::sym_eig_max(ev.hessian)
                                                    : std::numeric_limits<double>::quiet_NaN());
      traj.test_acc.push_back(test ? test->accuracy(p) : std::numeric_limits<double>::quiet_NaN());
    }
    if (t == iters) break;
    p.a_minus -= eta * ev.grad[0];
    p.a_plus -= eta * ev.grad[1];
    p.b -= eta * ev.grad[2];
    if (!(std::fabs(p.a_minus) <= kOverflow) || !(std::fabs(p.a_plus) <= kOverflow) ||
        !(std::fabs(p.b) <= kOverflow)) {
      throw EosError(ErrorCode::NumericOverflow, "network parameters overflowed");
    }
    prev_A = A;
  }
  traj.final_params = p;
  return traj;
}

ComparisonReport compare_to_mean_model(const SparseDataset& ds, const ReluParams& p0, double eta,
                                       std::int64_t iters, double bias_level) {
  if (p0.b != 0.0) throw EosError(ErrorCode::InvalidArgument, "comparison starts from b = 0");
  if (iters < 1) throw EosError(ErrorCode::InvalidArgument, "comparison needs iters >= 1");

  const Objective obj(ds);
  const double d = static_cast<double>(ds.d);
  mean_model::MeanModelConfig cfg;
  cfg.d = ds.d;
  cfg.eta = eta;
  cfg.A0 = d * (p0.a_minus + p0.a_plus);

  ComparisonReport report;
  report.d = ds.d;
  report.eta = eta;
  report.A0 = cfg.A0;

  ReluParams p = p0;
  mean_model::MeanModelState mm{cfg.A0, 0.0};
  for (std::int64_t t = 0;; ++t) {
    const double A = d * (p.a_minus + p.a_plus);
    report.b_net.push_back(p.b);
    report.b_mm.push_back(mm.b);
    report.A_net.push_back(A);
    report.A_mm.push_back(mm.A);
    report.max_b_dev = std::max(report.max_b_dev, std::fabs(p.b - mm.b));
    report.max_A_dev = std::max(report.max_A_dev, std::fabs(A - mm.A));
    report.compared = t + 1;
    if (p.b <= bias_level) {
      report.reached_bias_level = true;
      break;
    }
    if (t == iters) break;
    const auto g = obj.gradient(p);
    p.a_minus -= eta * g[0];
    p.a_plus -= eta * g[1];
    p.b -= eta * g[2];
    mm = mean_model::mm_step(mm, cfg);
  }
  return report;
}

}  // namespace eos::relu_net
