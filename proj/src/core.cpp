#include "rsbeam/core.hpp"

#include <cmath>

namespace rsbeam {

SystemConfig SystemConfig::from_snr(int nt, int k, double snr_db,
                                    double noise_power) {
  SystemConfig cfg;
  cfg.num_tx_antennas = nt;
  cfg.num_users = k;
  cfg.noise_power = noise_power;
  cfg.snr_db = snr_db;
  cfg.total_power = noise_power * std::pow(10.0, snr_db / 10.0);
  cfg.validate();
  return cfg;
}

void SystemConfig::validate() const {
  if (num_tx_antennas < 1 || num_users < 1)
    throw DimensionError("SystemConfig: N_t and K must be >= 1");
  if (total_power <= 0.0 || noise_power <= 0.0)
    throw std::invalid_argument("SystemConfig: P_t and sigma^2 must be > 0");
}

void check_dimensions(const SystemConfig& cfg, const ChannelSample& ch,
                      const BeamMatrix& P) {
  if (ch.channels.rows() != cfg.num_tx_antennas ||
      ch.channels.cols() != cfg.num_users)
    throw DimensionError("channel matrix does not match SystemConfig");
  if (P.cols.rows() != cfg.num_tx_antennas ||
      P.cols.cols() != cfg.num_users + 1)
    throw DimensionError("beam matrix does not match SystemConfig");
}

Sinrs compute_sinrs(const SystemConfig& cfg, const ChannelSample& ch,
                    const BeamMatrix& P) {
  check_dimensions(cfg, ch, P);
  const int k_users = cfg.num_users;
  Sinrs out;
  out.common.resize(k_users);
  out.priv.resize(k_users);
  for (int k = 0; k < k_users; ++k) {
    const VectorXcd hk = ch.channels.col(k);
    // |h_k^H p_i|^2 for i = 0..K
    VectorXd gains(k_users + 1);
    for (int i = 0; i <= k_users; ++i)
      gains(i) = std::norm(hk.dot(P.cols.col(i)));
    const double private_total = gains.tail(k_users).sum();
    out.common(k) = gains(0) / (private_total + cfg.noise_power);
    out.priv(k) =
        gains(k + 1) / (private_total - gains(k + 1) + cfg.noise_power);
  }
  return out;
}

RateReport rate_report(const SystemConfig& cfg, const ChannelSample& ch,
                       const BeamMatrix& P) {
  const Sinrs s = compute_sinrs(cfg, ch, P);
  RateReport r;
  r.per_user_common_rates = (1.0 + s.common.array()).log2();
  r.private_rates = (1.0 + s.priv.array()).log2();
  r.common_rate = r.per_user_common_rates.minCoeff();
  r.sum_rate = r.common_rate + r.private_rates.sum();
  return r;
}

double power_used(const BeamMatrix& P) { return P.cols.squaredNorm(); }

}  // namespace rsbeam
