// Fractional-programming transform (auxiliary variables, surrogate
// objective g) and the closed-form optimal beamforming structure.
#pragma once

#include <complex>

#include "rsbeam/core.hpp"

namespace rsbeam {

/// FP auxiliary variables for the common and private streams.
struct AuxState {
  VectorXd alpha_common;   // alpha_{0,k}
  VectorXd alpha_private;  // alpha_k
  VectorXcd beta_common;   // beta_{0,k}
  VectorXcd beta_private;  // beta_k
};

/// Lagrangian dual variables: lambda on the simplex, mu > 0.
struct DualState {
  VectorXd lambda;  // lambda_k > 0, sum = 1
  double mu = 1.0;

  static DualState uniform(int k_users, double total_power) {
    DualState d;
    d.lambda = VectorXd::Constant(k_users, 1.0 / k_users);
    d.mu = static_cast<double>(k_users) / total_power;
    return d;
  }
  /// Concatenated [lambda, mu], the xi vector.
  VectorXd concat() const {
    VectorXd xi(lambda.size() + 1);
    xi << lambda, mu;
    return xi;
  }
};

struct GValues {
  VectorXd common;   // g_{0,k}
  VectorXd priv;     // g_k
};

/// Optimal aux block for fixed P: alpha_{i,k} = gamma_{i,k},
/// beta_{i,k} = sqrt(1+alpha) h_k^H p_i / (sum_{j in {i} u K} |h_k^H p_j|^2 + sigma^2).
AuxState update_aux(const SystemConfig& cfg, const ChannelSample& ch,
                    const BeamMatrix& P);

/// Surrogate values g_{0,k} and g_k at the given aux block.
GValues g_values(const SystemConfig& cfg, const ChannelSample& ch,
                 const BeamMatrix& P, const AuxState& aux);

struct FpObjective {
  double value = 0.0;          // min_k g_{0,k} + sum_k g_k
  double worst_common_g = 0.0; // the slack y at optimum
};

FpObjective fp_objective(const SystemConfig& cfg, const ChannelSample& ch,
                         const BeamMatrix& P, const AuxState& aux);

/// Closed-form optimal beamformers for the given aux/dual blocks; each
/// column solves a Hermitian positive-definite system (never an explicit
/// inverse). Requires duals.mu > 0.
BeamMatrix obs_beamformers(const SystemConfig& cfg, const ChannelSample& ch,
                           const AuxState& aux, const DualState& duals);

}  // namespace rsbeam
