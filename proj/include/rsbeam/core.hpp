// Physical-layer data types and exact SINR / rate arithmetic for 1-layer
// rate splitting in the MU-MISO downlink.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace rsbeam {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// System-level constants shared by every module.
struct SystemConfig {
  int num_tx_antennas = 1;   // N_t
  int num_users = 1;         // K
  double total_power = 1.0;  // P_t, linear watts
  double noise_power = 1.0;  // sigma^2 per user, linear
  double snr_db = 0.0;       // informational, P_t = sigma^2 * 10^(snr_db/10)

  static SystemConfig from_snr(int nt, int k, double snr_db,
                               double noise_power = 1.0);
  void validate() const;
};

/// Per-sample channel state: h_k column vectors plus large-scale metadata.
struct ChannelSample {
  MatrixXcd channels;  // N_t x K, column k is h_k
  VectorXd large_scale_gains;  // rho_k > 0
  VectorXd distances;          // d_k in meters (provenance)
};

/// N_t x (K+1) beamforming matrix. Column 0 is the common beamformer p_0,
/// columns 1..K the private beamformers.
struct BeamMatrix {
  MatrixXcd cols;

  Eigen::Index num_antennas() const { return cols.rows(); }
  Eigen::Index num_users() const { return cols.cols() - 1; }
  VectorXcd common() const { return cols.col(0); }
  VectorXcd priv(int k) const { return cols.col(k + 1); }

  static BeamMatrix zero(int nt, int k) {
    return BeamMatrix{MatrixXcd::Zero(nt, k + 1)};
  }
};

/// Rates in bits/s/Hz.
struct RateReport {
  double common_rate = 0.0;            // R_0 = min_k R_{0,k}
  VectorXd private_rates;              // R_k
  VectorXd per_user_common_rates;      // R_{0,k}
  double sum_rate = 0.0;               // R_0 + sum_k R_k
};

struct Sinrs {
  VectorXd common;   // gamma_{0,k}
  VectorXd priv;     // gamma_k
};

/// gamma_{0,k} = |h_k^H p_0|^2 / (sum_i |h_k^H p_i|^2 + sigma^2),
/// gamma_k     = |h_k^H p_k|^2 / (sum_{i != k} |h_k^H p_i|^2 + sigma^2).
Sinrs compute_sinrs(const SystemConfig& cfg, const ChannelSample& ch,
                    const BeamMatrix& P);

RateReport rate_report(const SystemConfig& cfg, const ChannelSample& ch,
                       const BeamMatrix& P);

/// trace(P P^H), the squared Frobenius norm.
double power_used(const BeamMatrix& P);

/// Thrown on dimension mismatches between cfg, ch and P.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void check_dimensions(const SystemConfig& cfg, const ChannelSample& ch,
                      const BeamMatrix& P);

}  // namespace rsbeam
