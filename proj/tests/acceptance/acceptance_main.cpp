// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// `acceptance 2 5` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eos/error.hpp"
#include "eos/harness.hpp"
#include "eos/losses.hpp"
#include "eos/mean_model.hpp"
#include "eos/numerics.hpp"
#include "eos/relu_net.hpp"
#include "eos/single_neuron.hpp"
#include "support/oracles.hpp"

using namespace eos;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [" << what << "]";
    }
  }
};

constexpr double kPi = std::numbers::pi;

// ---- single neuron ---------------------------------------------------------

// Sweeps are shared by criteria 1-3 and computed once.
const std::vector<harness::SnSweepRow>& sweep(const std::string& loss, const std::string& grid) {
  static std::map<std::string, std::vector<harness::SnSweepRow>> cache;
  const std::string key = loss + "@" + grid;
  auto it = cache.find(key);
  if (it == cache.end()) {
    single_neuron::StopRule stop;
    stop.record_every = 0;
    stop.max_iters = 200'000'000;
    const auto etas = harness::parse_grid(grid);
    it = cache.emplace(key, harness::single_neuron_sweep(LossSpec::parse(loss), etas, 1.0, stop)).first;
  }
  return it->second;
}

const char* const kMainGrid = "log:1e-4:1e-1:20";

std::vector<const harness::SnSweepRow*> converged(const std::vector<harness::SnSweepRow>& rows) {
  std::vector<const harness::SnSweepRow*> out;
  for (const auto& r : rows) {
    if (r.ok()) out.push_back(&r);
  }
  return out;
}

Outcome criterion1() {
  Outcome o;
  for (const auto& spec : {LossSpec::sqrt_loss(), LossSpec::higher_order(1.5), LossSpec::higher_order(2.0),
                           LossSpec::higher_order(3.0), LossSpec::higher_order(10.0)}) {
    const std::string loss = spec.name();
    const auto rows = converged(sweep(loss, kMainGrid));
    double worst = -INFINITY;
    for (const auto* r : rows) worst = std::max(worst, r->y_inf_sq - 2.0 / r->eta);
    o.detail << ' ' << loss << ": " << rows.size() << "/20 converged, max(y^2 - 2/eta)=" << worst << ';';
    o.require(!rows.empty(), loss + " has no converged run");
    o.require(worst <= 1e-9, loss + " exceeds 2/eta");
  }
  return o;
}

Outcome criterion2() {
  Outcome o;
  for (double beta : {1.5, 2.0, 3.0, 10.0}) {
    const std::string loss = LossSpec::higher_order(beta).name();
    std::vector<double> xs, ys;
    for (const auto* r : converged(sweep(loss, kMainGrid))) {
      xs.push_back(r->eta);
      ys.push_back(r->gap);
    }
    const double predicted = 1.0 / (beta - 1.0);
    try {
      const auto fit = harness::fit_power_law(xs, ys, predicted, 0.15);
      o.detail << " beta=" << beta << ": slope " << fit.slope << " vs " << predicted << ", r2 "
               << fit.r_squared << " (" << fit.points << " pts);";
      o.require(fit.pass, loss + " slope");
    } catch (const EosError& e) {
      o.require(false, loss + ": " + e.what());
    }
  }
  return o;
}

Outcome criterion3() {
  Outcome o;
  const std::vector<std::pair<double, std::string>> series{
      {4.0 / 3.0, "log:1e-2:1.3e-1:12"}, {1.5, kMainGrid}, {4.0, kMainGrid}};
  for (const auto& [beta, grid] : series) {
    const std::string loss = LossSpec::higher_order(beta).name();
    std::vector<double> xs, ys;
    for (const auto* r : converged(sweep(loss, grid))) {
      xs.push_back(r->eta);
      ys.push_back(static_cast<double>(r->bounce_iters));
    }
    const double predicted = harness::predicted_bounce_slope(beta);
    try {
      const auto fit = harness::fit_power_law(xs, ys, predicted, 0.2);
      o.detail << " beta=" << beta << ": slope " << fit.slope << " vs " << predicted << ", r2 "
               << fit.r_squared << " (" << fit.points << " pts);";
      o.require(fit.pass, loss + " slope");
    } catch (const EosError& e) {
      o.require(false, loss + ": " + e.what());
    }
  }

  // beta = 2: bounce count / (log(1/eta)/eta^2) should be flat.
  std::vector<double> ratios;
  for (const auto* r : converged(sweep("higher-order:2", kMainGrid))) {
    ratios.push_back(static_cast<double>(r->bounce_iters) * r->eta * r->eta / std::log(1.0 / r->eta));
  }
  o.require(ratios.size() >= 8, "beta=2 has too few converged runs");
  if (!ratios.empty()) {
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double lo = sorted.front() / median, hi = sorted.back() / median;
    o.detail << " beta=2: ratio/median in [" << lo << ", " << hi << "] over " << ratios.size() << " pts";
    o.require(lo >= 0.8 && hi <= 1.2, "beta=2 ratio drifts");
  }
  return o;
}

// Plain GD loop, independent of single_neuron::run, for one long run.
double brute_force_sharpness(const LossSpec& loss, double x, double y, double eta) {
  for (long long t = 0; t < 2'000'000'000LL && std::fabs(x) >= 1e-14; ++t) {
    const double g = loss_deriv(loss, x * y);
    const double nx = x - eta * g * y;
    y -= eta * g * x;
    x = nx;
  }
  const double h = loss_second_deriv(loss, x * y);
  const double g = loss_deriv(loss, x * y);
  const std::array<std::array<double, 2>, 2> m{{{h * y * y, h * x * y + g}, {h * x * y + g, h * x * x}}};
  return oracle::power_iteration<2>(m);
}

Outcome criterion4() {
  Outcome o;
  for (const auto& loss : {LossSpec::sqrt_loss(), LossSpec::rescaled_sym_logistic()}) {
    for (double delta : {0.5, 1.0, 1.5}) {
      for (double eta : {1e-3, 1e-2}) {
        const auto st = single_neuron::scaled_init(-delta, eta);
        single_neuron::StopRule stop;
        stop.record_every = 0;
        const auto traj = single_neuron::run(st.x, st.y, loss, eta, stop);
        std::ostringstream tag;
        tag << loss.name() << " delta=" << delta << " eta=" << eta;
        if (!traj.converged()) {
          o.require(false, tag.str() + " did not converge");
          continue;
        }
        const double sharp = single_neuron::limiting_sharpness(traj);
        const double centre = (2.0 - delta) / eta;
        const double width = std::max(5.0 * (2.0 - delta), 5.0 * eta / std::min(delta, 2.0 - delta));
        o.require(std::fabs(sharp - centre) <= width, tag.str() + " outside bracket");
        o.detail << ' ' << tag.str() << ": |" << sharp << " - " << centre << "| <= " << width << ';';
      }
    }
  }
  const auto st = single_neuron::scaled_init(-1.0, 1e-2);
  single_neuron::StopRule stop;
  stop.record_every = 0;
  stop.tol_x = 1e-14;
  const auto traj = single_neuron::run(st.x, st.y, LossSpec::sqrt_loss(), 1e-2, stop);
  const double brute = brute_force_sharpness(LossSpec::sqrt_loss(), st.x, st.y, 1e-2);
  const double lib = single_neuron::limiting_sharpness(traj);
  o.detail << " long-run oracle " << brute << " vs " << lib;
  o.require(oracle::rel_diff(brute, lib) <= 1e-10, "long-run oracle disagrees");
  return o;
}

Outcome criterion5() {
  Outcome o;
  using V = std::array<double, 2>;

  double worst_a = 0.0;
  for (const auto& loss : {LossSpec::sqrt_loss(), LossSpec::rescaled_sym_logistic(), LossSpec::higher_order(2.0),
                           LossSpec::higher_order(1.5)}) {
    const V end = oracle::rk4<2>(
        [&](const V& u) {
          const auto r = single_neuron::gradient_flow_rhs({u[0], u[1]}, loss);
          return V{r.x, r.y};
        },
        V{3.0, 4.0}, 1.0, 10000);
    worst_a = std::max(worst_a, oracle::rel_diff(single_neuron::gf_conserved({end[0], end[1]}), 7.0));
  }
  o.detail << " (a) " << worst_a << ';';
  o.require(worst_a <= 1e-8, "(a) flow drift");

  numerics::RngStream rng(2024);
  double worst_b = 0.0;
  int steps = 0;
  const std::vector<LossSpec> losses{LossSpec::rescaled_sym_logistic(), LossSpec::sqrt_loss(),
                                     LossSpec::higher_order(2.0), LossSpec::huber()};
  while (steps < 100000) {
    const auto& loss = losses[rng.uniform_index(losses.size())];
    const double eta = std::pow(10.0, -3.0 + 2.5 * rng.uniform());
    const double y = 1.0 + 10.0 * rng.uniform();
    const double x = (2.0 * rng.uniform() - 1.0) * 0.8 * y;
    const double g = loss_deriv(loss, x * y);
    if (eta * std::fabs(g) > 0.5) continue;
    const single_neuron::State2D st{x, y};
    const auto next = single_neuron::gd_step(st, loss, eta);
    const double predicted = (1.0 - eta * eta * g * g) * single_neuron::gf_conserved(st);
    worst_b = std::max(worst_b, oracle::rel_diff(single_neuron::gf_conserved(next), predicted, 0.0));
    ++steps;
  }
  o.detail << " (b) " << worst_b << " over " << steps << " steps;";
  o.require(worst_b <= 1e-14, "(b) one-step identity");

  double worst_c = 0.0;
  for (int d : {100, 200}) {
    for (double A0 : {0.5, 1.5, -3.0}) {
      mean_model::MeanModelConfig cfg;
      cfg.d = d;
      cfg.A0 = A0;
      const V end = oracle::rk4<2>(
          [&](const V& u) {
            const auto r = mean_model::mm_flow_rhs({u[0], u[1]}, cfg);
            return V{r.A, r.b};
          },
          V{A0, 0.0}, 1.0, 100000);
      const double c0 = mean_model::mm_conserved({A0, 0.0}, cfg);
      worst_c = std::max(worst_c, oracle::rel_diff(mean_model::mm_conserved({end[0], end[1]}, cfg), c0));
    }
  }
  o.detail << " (c) " << worst_c;
  o.require(worst_c <= 1e-6, "(c) mean-model flow drift");
  return o;
}

// ---- mean model ------------------------------------------------------------

double seed_A0(int d, std::uint64_t seed) {
  const auto p = relu_net::default_init(d, seed);
  return d * (p.a_minus + p.a_plus);
}

Outcome criterion6() {
  Outcome o;
  constexpr int d = 200;
  const double star = 8.0 * kPi / (d * d);
  std::vector<double> grid;
  for (int k = 0; k <= 60; ++k) grid.push_back(star * std::pow(1.5 / 0.75, k / 60.0) * 0.75);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto res = mean_model::phase_transition_sweep(d, seed_A0(d, seed), grid, 0.05);
    if (!res.transition_eta) {
      o.require(false, "seed " + std::to_string(seed) + " no transition");
      continue;
    }
    const double ratio = *res.transition_eta / star;
    o.detail << " seed " << seed << ": " << ratio << ';';
    o.require(ratio >= 0.9 && ratio <= 1.1, "seed " + std::to_string(seed) + " outside [0.9, 1.1]");
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  for (int d : {100, 200}) {
    for (double A0 : {1.0, -1.0, seed_A0(d, 1), seed_A0(d, 2)}) {
      mean_model::MeanModelConfig cfg;
      cfg.d = d;
      cfg.eta = 10.0 * kPi / (double(d) * d);
      cfg.A0 = A0;
      mean_model::MmStopRule stop;
      stop.record_every = 0;
      const auto traj = mean_model::mm_run(cfg, stop);
      o.detail << " d=" << d << " A0=" << A0 << ": b_inf=" << traj.b_inf() << ';';
      o.require(traj.finished(), "run did not finish");
      o.require(traj.b_inf() <= -0.087, "b_inf above -0.087");
    }
  }
  return o;
}

Outcome criterion8() {
  Outcome o;
  int used = 0;
  double worst = -INFINITY;
  for (int d : {50, 100, 200, 400}) {
    for (double delta : {0.5, 1.0, 2.0, 4.0, 6.0, 7.5}) {
      for (double A0 : {0.05, -0.1, 0.3, -0.5, 1.0, -1.5, 2.0, 4.0}) {
        mean_model::MeanModelConfig cfg;
        cfg.d = d;
        cfg.eta = (8.0 - delta) * kPi / (double(d) * d);
        cfg.A0 = A0;
        const double gamma = *cfg.gamma();
        if (cfg.eta > gamma / std::fabs(A0)) continue;
        ++used;
        mean_model::MmStopRule stop;
        stop.record_every = 0;
        const auto traj = mean_model::mm_run(cfg, stop);
        const double bound = (cfg.eta / gamma) * std::fabs(A0);
        std::ostringstream tag;
        tag << "d=" << d << " delta=" << delta << " A0=" << A0;
        o.require(traj.finished(), tag.str() + " did not finish");
        o.require(traj.b_inf() <= 0.0 && traj.b_inf() >= -bound, tag.str() + " b_inf out of bounds");
        worst = std::max(worst, -traj.b_inf() / bound);
      }
    }
  }
  o.detail << ' ' << used << " configs, max |b_inf| / bound = " << worst;
  o.require(used >= 10, "too few configs meet the step-size condition");
  return o;
}

// ---- ReLU network ------------------------------------------------------------

Outcome criterion9() {
  Outcome o;
  constexpr int d = 200, n = 300;
  constexpr double lambda = 3.0, budget = 10.0;
  constexpr int seeds = 5;

  double b_small = 0.0;
  {
    constexpr double eta = 2.5e-5;
    const auto iters = static_cast<std::int64_t>(std::llround(budget / eta));
    for (std::uint64_t s = 1; s <= seeds; ++s) {
      const auto traj = relu_net::train_full_batch(relu_net::generate_dataset(d, n, lambda, s),
                                                   relu_net::default_init(d, s), eta, iters, {iters, false, false});
      b_small += traj.final_params.b / seeds;
    }
  }
  o.detail << " (a) mean b_final " << b_small << ';';
  o.require(std::fabs(b_small) < 0.02, "(a) |b_final| >= 0.02 at eta=2.5e-5");

  constexpr double eta = 2.5e-3;
  const auto iters = static_cast<std::int64_t>(std::llround(budget / eta));
  double b_large = 0.0, alternations = 0.0;
  int entered = 0;
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    const auto traj = relu_net::train_full_batch(relu_net::generate_dataset(d, n, lambda, s),
                                                 relu_net::default_init(d, s), eta, iters, {1, true, false});
    const double b_final = traj.final_params.b;
    b_large += b_final / seeds;
    alternations += static_cast<double>(traj.max_sign_alternations) / seeds;
    // Bias-drop window: from b <= -0.01 until b first gets within 10% of its final value.
    bool in_band = false;
    for (std::size_t t = 0; t < traj.params.size(); ++t) {
      const double b = traj.params[t].b;
      if (b > -0.01) continue;
      if (b <= 0.9 * b_final) break;
      const double sharp = traj.sharpness[t];
      if (sharp >= 0.8 * 2.0 / eta && sharp <= 1.05 * 2.0 / eta) in_band = true;
    }
    entered += in_band ? 1 : 0;
  }
  o.detail << " (b) mean b_final " << b_large << ", mean max alternations " << alternations << ';'
           << " (c) " << entered << "/" << seeds << " seeds reach [0.8, 1.05] 2/eta";
  o.require(b_large < -0.3, "(b) b_final");
  o.require(alternations >= 10.0, "(b) alternations");
  o.require(entered == seeds, "(c) sharpness band");
  return o;
}

Outcome criterion10() {
  Outcome o;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto report = relu_net::compare_to_mean_model(relu_net::generate_dataset(200, 300, 3.0, s),
                                                        relu_net::default_init(200, s), 2.5e-3, 20000);
    o.detail << " seed " << s << ": " << report.max_b_dev << " over " << report.compared << " its;";
    o.require(report.reached_bias_level, "seed " + std::to_string(s) + " never reached b = -0.5");
    o.require(report.max_b_dev <= 0.1, "seed " + std::to_string(s) + " deviates");
  }
  return o;
}

// ---- numerics --------------------------------------------------------------

Outcome criterion11() {
  Outcome o;
  double g_err = 0.0, gp_err = 0.0;
  for (double b = -5.0; b <= 3.0 + 1e-12; b += 0.05) {
    const double q = numerics::adaptive_quadrature(
        [b](double z) { return (z + b) * numerics::std_normal_pdf(z); }, -b, 14.0, 1e-14);
    g_err = std::max(g_err, std::fabs(mean_model::smoothed_relu(b) - q));
    const double fd = oracle::central_difference(mean_model::smoothed_relu, b, 1e-6);
    gp_err = std::max(gp_err, std::fabs(mean_model::smoothed_relu_deriv(b) - fd));
  }
  o.detail << " g " << g_err << ", g' " << gp_err << ';';
  o.require(g_err <= 1e-10, "g vs quadrature");
  o.require(gp_err <= 1e-8, "g' vs finite difference");

  const auto ds = relu_net::generate_dataset(30, 40, 3.0, 21);
  const relu_net::Objective obj(ds);
  numerics::RngStream rng(8);
  double grad_err = 0.0;
  for (int checked = 0; checked < 100;) {
    relu_net::ReluParams p{rng.normal() / std::sqrt(30.0), rng.normal() / std::sqrt(30.0), 0.6 * rng.normal()};
    if (obj.kink_distance(p.b) < 1e-4) continue;
    const auto g = obj.gradient(p);
    for (int c = 0; c < 3; ++c) {
      auto f = [&](double u) {
        relu_net::ReluParams q = p;
        (c == 0 ? q.a_minus : c == 1 ? q.a_plus : q.b) = u;
        return obj.loss(q);
      };
      const double x = c == 0 ? p.a_minus : c == 1 ? p.a_plus : p.b;
      grad_err = std::max(grad_err, oracle::rel_diff(g[c], oracle::central_difference(f, x, 1e-6), 1e-6));
    }
    ++checked;
  }
  o.detail << " relu grad rel " << grad_err << ';';
  o.require(grad_err <= 1e-5, "relu gradient vs finite difference");

  double eig_err = 0.0;
  for (int k = 0; k < 300; ++k) {
    numerics::Mat2 m2{};
    numerics::Mat3 m3{};
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        m3[i][j] = m3[j][i] = 10.0 * rng.normal();
        if (i < 2 && j < 2) m2[i][j] = m2[j][i] = m3[i][j];
      }
    }
    eig_err = std::max(eig_err, std::fabs(numerics::sym_eig_max(m2) - oracle::power_iteration<2>(m2)));
    eig_err = std::max(eig_err, std::fabs(numerics::sym_eig_max(m3) - oracle::power_iteration<3>(m3)));
  }
  o.detail << " eig " << eig_err;
  o.require(eig_err <= 1e-10, "sym_eig_max vs power iteration");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  app.add_option("criteria", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"EoS sharpness ceiling", criterion1},
      {"gap scaling law", criterion2},
      {"bounce-count scaling", criterion3},
      {"gradient-flow regime sharpness", criterion4},
      {"conservation", criterion5},
      {"mean-model phase transition", criterion6},
      {"mean-model EoS bias", criterion7},
      {"mean-model gradient-flow bias bound", criterion8},
      {"ReLU network qualitative behaviour", criterion9},
      {"mean-model fidelity", criterion10},
      {"numerics oracles", criterion11},
  };
  const std::set<int> selected(only.begin(), only.end());

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s (%.1fs):%s\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(), secs,
                o.detail.str().c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
