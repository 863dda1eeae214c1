#include "doctest.h"
#include "rsbeam/hfpi.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace rsbeam;

TEST_CASE("hfpi_step leaves lambda unchanged when all g_common are equal") {
  DualState d = DualState::uniform(3, 10.0);
  const VectorXd g = VectorXd::Constant(3, 1.5);
  const HfpiStepResult r = hfpi_step(d, g, 8.0, 10.0, 0.1);
  REQUIRE(r.status == HfpiStatus::kOk);
  CHECK((r.duals.lambda - d.lambda).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.duals.mu == doctest::Approx(d.mu * 8.1 / 10.1));
}

TEST_CASE("hfpi_step leaves mu unchanged when power matches the budget") {
  DualState d = DualState::uniform(2, 4.0);
  VectorXd g(2);
  g << 0.5, 0.9;
  const HfpiStepResult r = hfpi_step(d, g, 4.0, 4.0, 0.1);
  REQUIRE(r.status == HfpiStatus::kOk);
  CHECK(r.duals.mu == doctest::Approx(d.mu));
}

TEST_CASE("hfpi_step worked example") {
  DualState d;
  d.lambda = VectorXd::Constant(2, 0.5);
  d.mu = 1.0;
  VectorXd g(2);
  g << 1.0, 2.0;
  const HfpiStepResult r = hfpi_step(d, g, 4.0, 4.0, 0.1);
  REQUIRE(r.status == HfpiStatus::kOk);
  CHECK(r.duals.lambda(1) == doctest::Approx(0.5 * 1.1 / 2.1).epsilon(1e-12));
  CHECK(r.duals.lambda(0) ==
        doctest::Approx(0.5 + (1.0 - 1.1 / 2.1) * 0.5).epsilon(1e-12));
  CHECK(r.duals.lambda.sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("hfpi_step preserves the simplex and mu sign under fuzzing") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ug(-0.05, 3.0);
  std::uniform_real_distribution<double> up(0.1, 20.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const int k_users = 1 + static_cast<int>(rng() % 8);
    DualState d;
    d.lambda.resize(k_users);
    for (int k = 0; k < k_users; ++k) d.lambda(k) = up(rng);
    d.lambda /= d.lambda.sum();
    d.mu = up(rng);
    VectorXd g(k_users);
    for (int k = 0; k < k_users; ++k) g(k) = ug(rng);
    const HfpiStepResult r = hfpi_step(d, g, up(rng), up(rng), 0.1);
    if (r.status != HfpiStatus::kOk) continue;
    CHECK(std::abs(r.duals.lambda.sum() - 1.0) < 1e-12);
    CHECK(r.duals.mu > 0.0);
  }
}

TEST_CASE("hfpi_step reports nonpositive denominators") {
  DualState d = DualState::uniform(2, 1.0);
  VectorXd g(2);
  g << -0.5, 1.0;
  const HfpiStepResult r = hfpi_step(d, g, 1.0, 1.0, 0.1);
  CHECK(r.status == HfpiStatus::kNonPositiveDenominator);
}

TEST_CASE("init_beamformers uses the exact power budget") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const SystemConfig cfg =
        SystemConfig::from_snr(2 + static_cast<int>(rng() % 4),
                               1 + static_cast<int>(rng() % 4), 20.0);
    const ChannelSample ch = testutil::random_channel(cfg, rng);
    const BeamMatrix P = init_beamformers(cfg, ch);
    CHECK(std::abs(power_used(P) - cfg.total_power) <=
          1e-12 * cfg.total_power);
  }
}

TEST_CASE("init_beamformers single-user private column is a matched filter") {
  const SystemConfig cfg = SystemConfig::from_snr(4, 1, 10.0);
  std::mt19937_64 rng(5);
  const ChannelSample ch = testutil::random_channel(cfg, rng);
  const BeamMatrix P = init_beamformers(cfg, ch);
  const VectorXcd h = ch.channels.col(0);
  const VectorXcd p1 = P.cols.col(1);
  const double cross =
      (p1 - h * (h.dot(p1) / h.squaredNorm())).norm() / p1.norm();
  CHECK(cross < 1e-12);
}

TEST_CASE("inner loop at K=1 drives power to the budget") {
  const SystemConfig cfg = SystemConfig::from_snr(4, 1, 20.0);
  std::mt19937_64 rng(7);
  const ChannelSample ch = testutil::random_channel(cfg, rng);
  const BeamMatrix P0 = init_beamformers(cfg, ch);
  const AuxState aux = update_aux(cfg, ch, P0);
  const HfpiConfig hcfg;
  const InnerLoopResult r = hfpi_inner_loop(
      cfg, ch, aux, DualState::uniform(1, cfg.total_power), hcfg);
  CHECK(r.converged);
  CHECK(r.duals.lambda(0) == 1.0);
  // at the fixed point the mu update is a no-op up to the tolerance
  CHECK(std::abs(power_used(r.beams) - cfg.total_power) /
            (cfg.total_power + hcfg.rho) * r.duals.mu <
        10 * hcfg.inner_tol);
}

TEST_CASE("inner-loop fixed point equalizes active g_common and the power") {
  const SystemConfig cfg = SystemConfig::from_snr(2, 2, 20.0);
  std::mt19937_64 rng(17);
  const HfpiConfig hcfg;
  for (int trial = 0; trial < 5; ++trial) {
    const ChannelSample ch = testutil::random_channel(cfg, rng);
    const BeamMatrix P0 = init_beamformers(cfg, ch);
    const AuxState aux = update_aux(cfg, ch, P0);
    const InnerLoopResult r = hfpi_inner_loop(
        cfg, ch, aux, DualState::uniform(2, cfg.total_power), hcfg);
    if (!r.converged) continue;
    CHECK(std::abs(power_used(r.beams) - cfg.total_power) /
              (cfg.total_power + hcfg.rho) * r.duals.mu <
          100 * hcfg.inner_tol);
    const GValues g = g_values(cfg, ch, r.beams, aux);
    const double worst = g.common.minCoeff();
    for (int k = 0; k < 2; ++k) {
      if (r.duals.lambda(k) > 1e-3)
        CHECK(std::abs(g.common(k) - worst) <
              100 * hcfg.inner_tol * (std::abs(g.common(k)) + hcfg.rho) /
                  r.duals.lambda(k));
    }
  }
}

TEST_CASE("converged duals pass the finite-difference stationarity check") {
  // Lagrangian restricted to P, as in the fp-obs stationarity oracle.
  const SystemConfig cfg = SystemConfig::from_snr(2, 2, 20.0);
  std::mt19937_64 rng(19);
  const ChannelSample ch = testutil::random_channel(cfg, rng);
  const BeamMatrix P0 = init_beamformers(cfg, ch);
  const AuxState aux = update_aux(cfg, ch, P0);
  const HfpiConfig hcfg;
  const InnerLoopResult r = hfpi_inner_loop(
      cfg, ch, aux, DualState::uniform(2, cfg.total_power), hcfg);
  REQUIRE(r.converged);

  auto lagrangian = [&](const BeamMatrix& P) {
    const GValues g = g_values(cfg, ch, P, aux);
    return g.priv.sum() + r.duals.lambda.dot(g.common) -
           r.duals.mu * power_used(P);
  };
  BeamMatrix work = r.beams;
  auto* entries = reinterpret_cast<double*>(work.cols.data());
  double worst = 0.0;
  const double step = 1e-6;
  for (int i = 0; i < 2 * work.cols.size(); ++i) {
    const double saved = entries[i];
    entries[i] = saved + step;
    const double hi = lagrangian(work);
    entries[i] = saved - step;
    const double lo = lagrangian(work);
    entries[i] = saved;
    worst = std::max(worst, std::abs(hi - lo) / (2.0 * step));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("single-user solve reaches the known optimum") {
  std::mt19937_64 rng(23);
  const SystemConfig cfg = SystemConfig::from_snr(4, 1, 20.0);
  const HfpiConfig hcfg;
  for (int trial = 0; trial < 10; ++trial) {
    const ChannelSample ch = testutil::random_channel(cfg, rng);
    const SolveResult r = fp_hfpi_solve(cfg, ch, hcfg);
    const double optimum = std::log2(
        1.0 + cfg.total_power * ch.channels.col(0).squaredNorm() /
                  cfg.noise_power);
    CHECK(r.rates.sum_rate == doctest::Approx(optimum).epsilon(1e-3));
    CHECK(r.rates.sum_rate <= optimum + 1e-9);
  }
}

TEST_CASE("solve diagnostics: monotone objective, feasibility, determinism") {
  std::mt19937_64 rng(29);
  const SystemConfig cfg = SystemConfig::from_snr(2, 2, 20.0);
  const ChannelSample ch = testutil::random_channel(cfg, rng);
  const HfpiConfig hcfg;
  const SolveResult a = fp_hfpi_solve(cfg, ch, hcfg);
  const SolveResult b = fp_hfpi_solve(cfg, ch, hcfg);

  for (std::size_t i = 1; i < a.diag.objective_trace.size(); ++i)
    CHECK(a.diag.objective_trace[i] >=
          a.diag.objective_trace[i - 1] - 1e-6);
  CHECK(power_used(a.beams) <= cfg.total_power * (1.0 + 1e-6));
  CHECK(a.diag.inner_iters_per_outer.size() ==
        static_cast<std::size_t>(a.diag.outer_iters));
  CHECK(a.diag.final_sr >= 0.0);

  // bit-identical rerun
  CHECK(a.rates.sum_rate == b.rates.sum_rate);
  CHECK((a.beams.cols - b.beams.cols).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.diag.outer_iters == b.diag.outer_iters);
}

TEST_CASE("solve beats a random-beamformer sanity baseline") {
  std::mt19937_64 rng(31);
  const SystemConfig cfg = SystemConfig::from_snr(2, 2, 20.0);
  const ChannelSample ch = testutil::random_channel(cfg, rng);
  const SolveResult r = fp_hfpi_solve(cfg, ch, HfpiConfig{});
  double best = 0.0;
  for (int i = 0; i < 500; ++i) {
    const BeamMatrix P = testutil::random_feasible_beams(cfg, rng);
    best = std::max(best, rate_report(cfg, ch, P).sum_rate);
  }
  CHECK(r.rates.sum_rate >= best * 0.95);
}
