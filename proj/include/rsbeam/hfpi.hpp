// Hyperplane fixed-point iteration for the dual variables and the full
// two-loop FP-HFPI solver.
#pragma once

#include <vector>

#include "rsbeam/fp_obs.hpp"

namespace rsbeam {

struct HfpiConfig {
  double rho = 0.1;          // damping constant in the dual updates
  double inner_tol = 1e-5;
  double outer_tol = 1e-4;
  int max_inner = 500;
  int max_outer = 2000;
};

struct SolveDiagnostics {
  int outer_iters = 0;
  std::vector<int> inner_iters_per_outer;
  double final_sr = 0.0;
  std::vector<double> objective_trace;  // fp objective after each AO iteration
  double wall_time = 0.0;               // seconds
  bool converged = true;
  DualState duals_first;  // duals after the first AO iteration's inner loop
  DualState duals_last;   // duals at final convergence
};

enum class HfpiStatus { kOk, kNonPositiveDenominator };

struct HfpiStepResult {
  DualState duals;
  HfpiStatus status = HfpiStatus::kOk;
};

/// One multiplicative dual update. g_common holds g_{0,k}(P) at the
/// current beamformers; used_power = tr(P P^H).
HfpiStepResult hfpi_step(const DualState& duals, const VectorXd& g_common,
                         double used_power, double total_power, double rho);

struct InnerLoopResult {
  DualState duals;
  BeamMatrix beams;
  int iters = 0;
  bool converged = true;
};

/// Alternates obs_beamformers and hfpi_step at a fixed aux block until the
/// relative change of xi = [lambda, mu] falls below inner_tol.
InnerLoopResult hfpi_inner_loop(const SystemConfig& cfg,
                                const ChannelSample& ch, const AuxState& aux,
                                const DualState& duals_init,
                                const HfpiConfig& hcfg);

/// Feasible warm start: matched-filter privates at half power split
/// equally, common along the principal eigenvector of sum_k h_k h_k^H / K.
/// Uses the full power budget exactly.
BeamMatrix init_beamformers(const SystemConfig& cfg, const ChannelSample& ch);

struct SolveResult {
  BeamMatrix beams;
  RateReport rates;
  SolveDiagnostics diag;
};

SolveResult fp_hfpi_solve(const SystemConfig& cfg, const ChannelSample& ch,
                          const HfpiConfig& hcfg);

}  // namespace rsbeam
