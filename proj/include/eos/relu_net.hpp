#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eos/numerics.hpp"

namespace eos::relu_net {

// x_i = lambda * y_i * e_{j_i} + xi_i with standard normal noise. Row-major n x d.
struct SparseDataset {
  int d = 0;
  int n = 0;
  double lambda = 0.0;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<int> js;
  std::uint64_t seed = 0;

  std::span<const double> row(int i) const {
    return {xs.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(d),
            static_cast<std::size_t>(d)};
  }
};

// Per sample, from RngStream(seed): label (uniform < 1/2 gives -1), then index j,
// then d normals. Requires d, n >= 1 and lambda > 1.
SparseDataset generate_dataset(int d, int n, double lambda, std::uint64_t seed);
// Same stream without the lambda > 1 check; lambda = 0 gives pure noise.
SparseDataset generate_dataset_unchecked(int d, int n, double lambda, std::uint64_t seed);

struct ReluParams {
  double a_minus = 0.0;
  double a_plus = 0.0;
  double b = 0.0;
};

// a-, a+ ~ N(0, 1/(2d)) and b = 0, drawn from RngStream(seed + 2) so the draw is
// independent of the training (seed) and test (seed + 1) sets.
ReluParams default_init(int d, std::uint64_t seed);

// a- sum ReLU(-x_i + b) + a+ sum ReLU(x_i + b).
double network_output(const ReluParams& p, std::span<const double> x);

// Sums of active units and their counts at bias b; ReLU'(0) is taken as 0.
struct Features {
  double s_minus = 0.0;
  double s_plus = 0.0;
  double n_minus = 0.0;
  double n_plus = 0.0;
};

Features features_direct(std::span<const double> x, double b);

struct LossEval {
  double loss = 0.0;
  std::array<double, 3> grad{};
  numerics::Mat3 hessian{};
};

/// Mean logistic loss over a dataset in the parameters (a-, a+, b).
/// Each sample keeps its coordinates sorted with prefix sums, so the features
/// at any bias cost O(log d) and depend only on the multiset of coordinates.
class Objective {
 public:
  explicit Objective(const SparseDataset& ds);

  int d() const { return d_; }
  int n() const { return n_; }

  Features features(int i, double b) const;
  double output(int i, const ReluParams& p) const;

  double loss(const ReluParams& p) const;
  std::array<double, 3> gradient(const ReluParams& p) const;
  LossEval evaluate(const ReluParams& p, bool with_hessian) const;
  // Fraction of samples with sign(f(x_i)) == y_i; f = 0 counts as wrong.
  double accuracy(const ReluParams& p) const;
  // Smallest |+-x_ik + b| over all samples and coordinates.
  double kink_distance(double b) const;

 private:
  int d_;
  int n_;
  std::vector<double> ys_;
  std::vector<double> sorted_;
  // prefix_[i*(d+1) + k] = sum of the k smallest coordinates of sample i.
  std::vector<double> prefix_;
};

// lambda_max of the 3x3 Hessian. Throws KinkEncountered if some |+-x_ik + b| <= 1e-12.
double param_hessian_sharpness(const SparseDataset& ds, const ReluParams& p);
double param_hessian_sharpness(const Objective& obj, const ReluParams& p);

struct TrainOptions {
  std::int64_t record_every = 1;
  bool track_sharpness = true;
  bool track_test_accuracy = true;
};

struct ReluTrajectory {
  double eta = 0.0;
  std::vector<std::int64_t> iters;
  std::vector<ReluParams> params;
  std::vector<double> A;
  std::vector<double> loss;
  std::vector<double> sharpness;
  std::vector<double> test_acc;
  // Longest run of consecutive sign flips of A over all iterations.
  std::int64_t max_sign_alternations = 0;
  ReluParams final_params;
};

/// Full-batch GD for `iters` steps. Records iterations 0, record_every, ...
/// and the final one; the test set is generate_dataset(d, n, lambda, seed + 1).
ReluTrajectory train_full_batch(const SparseDataset& ds, const ReluParams& p0, double eta,
                                std::int64_t iters, const TrainOptions& opts = {});

struct ComparisonReport {
  int d = 0;
  double eta = 0.0;
  double A0 = 0.0;
  // Iterations t = 0..compared-1 form the initial phase.
  std::int64_t compared = 0;
  bool reached_bias_level = false;
  double max_b_dev = 0.0;
  double max_A_dev = 0.0;
  std::vector<double> b_net;
  std::vector<double> b_mm;
  std::vector<double> A_net;
  std::vector<double> A_mm;
};

/// Steps the network and the mean model (A0 = d(a-_0 + a+_0), b0 = 0) in
/// lockstep until the network bias first reaches bias_level or iters run out.
ComparisonReport compare_to_mean_model(const SparseDataset& ds, const ReluParams& p0, double eta,
                                       std::int64_t iters, double bias_level = -0.5);

}  // namespace eos::relu_net
