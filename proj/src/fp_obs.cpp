#include "rsbeam/fp_obs.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace rsbeam {

AuxState update_aux(const SystemConfig& cfg, const ChannelSample& ch,
                    const BeamMatrix& P) {
  check_dimensions(cfg, ch, P);
  const int k_users = cfg.num_users;
  const Sinrs s = compute_sinrs(cfg, ch, P);

  AuxState aux;
  aux.alpha_common = s.common;
  aux.alpha_private = s.priv;
  aux.beta_common.resize(k_users);
  aux.beta_private.resize(k_users);

  for (int k = 0; k < k_users; ++k) {
    const VectorXcd hk = ch.channels.col(k);
    VectorXd gains(k_users + 1);
    for (int i = 0; i <= k_users; ++i)
      gains(i) = std::norm(hk.dot(P.cols.col(i)));
    const double private_total = gains.tail(k_users).sum();
    // j in {0} u K: all streams.  j in {k} u K: private streams only.
    const double denom_common = gains(0) + private_total + cfg.noise_power;
    const double denom_private = private_total + cfg.noise_power;
    aux.beta_common(k) = std::sqrt(1.0 + aux.alpha_common(k)) *
                         hk.dot(P.cols.col(0)) / denom_common;
    aux.beta_private(k) = std::sqrt(1.0 + aux.alpha_private(k)) *
                          hk.dot(P.cols.col(k + 1)) / denom_private;
  }
  return aux;
}

GValues g_values(const SystemConfig& cfg, const ChannelSample& ch,
                 const BeamMatrix& P, const AuxState& aux) {
  check_dimensions(cfg, ch, P);
  const int k_users = cfg.num_users;
  GValues g;
  g.common.resize(k_users);
  g.priv.resize(k_users);

  for (int k = 0; k < k_users; ++k) {
    const VectorXcd hk = ch.channels.col(k);
    VectorXd gains(k_users + 1);
    for (int i = 0; i <= k_users; ++i)
      gains(i) = std::norm(hk.dot(P.cols.col(i)));
    const double private_total = gains.tail(k_users).sum();
    const double denom_common = gains(0) + private_total + cfg.noise_power;
    const double denom_private = private_total + cfg.noise_power;

    const double ac = aux.alpha_common(k);
    const std::complex<double> bc = aux.beta_common(k);
    g.common(k) = std::log2(1.0 + ac) - ac +
                  2.0 * std::sqrt(1.0 + ac) *
                      (std::conj(bc) * hk.dot(P.cols.col(0))).real() -
                  std::norm(bc) * denom_common;

    const double ap = aux.alpha_private(k);
    const std::complex<double> bp = aux.beta_private(k);
    g.priv(k) = std::log2(1.0 + ap) - ap +
                2.0 * std::sqrt(1.0 + ap) *
                    (std::conj(bp) * hk.dot(P.cols.col(k + 1))).real() -
                std::norm(bp) * denom_private;
  }
  return g;
}

FpObjective fp_objective(const SystemConfig& cfg, const ChannelSample& ch,
                         const BeamMatrix& P, const AuxState& aux) {
  const GValues g = g_values(cfg, ch, P, aux);
  FpObjective obj;
  obj.worst_common_g = g.common.minCoeff();
  obj.value = obj.worst_common_g + g.priv.sum();
  return obj;
}

BeamMatrix obs_beamformers(const SystemConfig& cfg, const ChannelSample& ch,
                           const AuxState& aux, const DualState& duals) {
  if (duals.mu <= 0.0)
    throw std::invalid_argument("obs_beamformers: mu must be > 0");
  const int nt = cfg.num_tx_antennas;
  const int k_users = cfg.num_users;

  MatrixXcd a_common = duals.mu * MatrixXcd::Identity(nt, nt);
  MatrixXcd a_private = a_common;
  VectorXcd rhs_common = VectorXcd::Zero(nt);
  for (int j = 0; j < k_users; ++j) {
    const VectorXcd hj = ch.channels.col(j);
    const double wc = duals.lambda(j) * std::norm(aux.beta_common(j));
    const MatrixXcd outer = hj * hj.adjoint();
    a_common += wc * outer;
    a_private += (std::norm(aux.beta_private(j)) + wc) * outer;
    rhs_common += std::sqrt(1.0 + aux.alpha_common(j)) * aux.beta_common(j) *
                  duals.lambda(j) * hj;
  }

  BeamMatrix P = BeamMatrix::zero(nt, k_users);
  const Eigen::LLT<MatrixXcd> llt_common(a_common);
  P.cols.col(0) = llt_common.solve(rhs_common);
  // The private-stream system matrix is shared by all k.
  const Eigen::LLT<MatrixXcd> llt_private(a_private);
  for (int k = 0; k < k_users; ++k) {
    const VectorXcd rhs = std::sqrt(1.0 + aux.alpha_private(k)) *
                          aux.beta_private(k) * ch.channels.col(k);
    P.cols.col(k + 1) = llt_private.solve(rhs);
  }
  return P;
}

}  // namespace rsbeam
