#include "rsbeam/hfpi.hpp"

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>

namespace rsbeam {

HfpiStepResult hfpi_step(const DualState& duals, const VectorXd& g_common,
                         double used_power, double total_power, double rho) {
  const int k_users = static_cast<int>(g_common.size());
  HfpiStepResult out;
  out.duals = duals;

  int k_hat = 0;  // argmin, ties to lowest index
  g_common.minCoeff(&k_hat);
  const double worst = g_common(k_hat) + rho;

  for (int k = 0; k < k_users; ++k) {
    if (g_common(k) + rho <= 0.0) {
      out.status = HfpiStatus::kNonPositiveDenominator;
      return out;
    }
  }

  double transferred = 0.0;
  for (int k = 0; k < k_users; ++k) {
    if (k == k_hat) continue;
    const double ratio = worst / (g_common(k) + rho);
    out.duals.lambda(k) = ratio * duals.lambda(k);
    transferred += (1.0 - ratio) * duals.lambda(k);
  }
  out.duals.lambda(k_hat) = duals.lambda(k_hat) + transferred;
  out.duals.mu = (used_power + rho) / (total_power + rho) * duals.mu;
  return out;
}

InnerLoopResult hfpi_inner_loop(const SystemConfig& cfg,
                                const ChannelSample& ch, const AuxState& aux,
                                const DualState& duals_init,
                                const HfpiConfig& hcfg) {
  InnerLoopResult out;
  out.duals = duals_init;
  out.beams = obs_beamformers(cfg, ch, aux, out.duals);
  out.converged = false;

  for (int t = 0; t < hcfg.max_inner; ++t) {
    const GValues g = g_values(cfg, ch, out.beams, aux);
    const HfpiStepResult step = hfpi_step(out.duals, g.common,
                                          power_used(out.beams),
                                          cfg.total_power, hcfg.rho);
    out.iters = t + 1;
    if (step.status != HfpiStatus::kOk) break;

    const VectorXd prev = out.duals.concat();
    const VectorXd next = step.duals.concat();
    const double change = (next - prev).cwiseAbs().maxCoeff();
    out.duals = step.duals;
    out.beams = obs_beamformers(cfg, ch, aux, out.duals);
    if (change < hcfg.inner_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

BeamMatrix init_beamformers(const SystemConfig& cfg, const ChannelSample& ch) {
  const int nt = cfg.num_tx_antennas;
  const int k_users = cfg.num_users;
  BeamMatrix P = BeamMatrix::zero(nt, k_users);

  MatrixXcd covariance = MatrixXcd::Zero(nt, nt);
  for (int k = 0; k < k_users; ++k) {
    const VectorXcd hk = ch.channels.col(k);
    covariance += hk * hk.adjoint() / static_cast<double>(k_users);
    P.cols.col(k + 1) =
        std::sqrt(cfg.total_power / (2.0 * k_users)) * hk / hk.norm();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(covariance);
  VectorXcd u = eig.eigenvectors().col(nt - 1);  // principal eigenvector
  P.cols.col(0) = std::sqrt(cfg.total_power / 2.0) * u / u.norm();
  return P;
}

SolveResult fp_hfpi_solve(const SystemConfig& cfg, const ChannelSample& ch,
                          const HfpiConfig& hcfg) {
  const auto start = std::chrono::steady_clock::now();
  SolveResult out;
  out.beams = init_beamformers(cfg, ch);
  DualState duals = DualState::uniform(cfg.num_users, cfg.total_power);

  double prev_sr = rate_report(cfg, ch, out.beams).sum_rate;
  out.diag.converged = false;

  for (int m = 0; m < hcfg.max_outer; ++m) {
    const AuxState aux = update_aux(cfg, ch, out.beams);
    const InnerLoopResult inner =
        hfpi_inner_loop(cfg, ch, aux, duals, hcfg);
    duals = inner.duals;  // warm-start the next AO iteration
    out.beams = inner.beams;
    out.diag.outer_iters = m + 1;
    out.diag.inner_iters_per_outer.push_back(inner.iters);
    out.diag.objective_trace.push_back(
        fp_objective(cfg, ch, out.beams, aux).value);
    if (m == 0) out.diag.duals_first = duals;

    const double sr = rate_report(cfg, ch, out.beams).sum_rate;
    const double change = std::abs(sr - prev_sr);
    prev_sr = sr;
    if (change < hcfg.outer_tol) {
      out.diag.converged = true;
      break;
    }
  }

  out.diag.duals_last = duals;
  // The inexact inner loop can overshoot the power budget by a
  // tolerance-sized amount; project back onto the feasible ball.
  const double used = power_used(out.beams);
  if (used > cfg.total_power)
    out.beams.cols *= std::sqrt(cfg.total_power / used);
  out.rates = rate_report(cfg, ch, out.beams);
  out.diag.final_sr = out.rates.sum_rate;
  out.diag.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

}  // namespace rsbeam
