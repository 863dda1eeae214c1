// Shared helpers for the test suites: seeded random instances and
// scalar-loop oracles kept independent of the library implementation.
#pragma once

#include <complex>
#include <random>

#include "rsbeam/core.hpp"

namespace rsbeam::testutil {

inline ChannelSample random_channel(const SystemConfig& cfg,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  ChannelSample ch;
  ch.channels.resize(cfg.num_tx_antennas, cfg.num_users);
  for (int k = 0; k < cfg.num_users; ++k)
    for (int a = 0; a < cfg.num_tx_antennas; ++a)
      ch.channels(a, k) = std::complex<double>(n(rng), n(rng));
  ch.large_scale_gains = VectorXd::Ones(cfg.num_users);
  ch.distances = VectorXd::Zero(cfg.num_users);
  return ch;
}

/// Random P scaled to use the full power budget.
inline BeamMatrix random_feasible_beams(const SystemConfig& cfg,
                                        std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  BeamMatrix P = BeamMatrix::zero(cfg.num_tx_antennas, cfg.num_users);
  for (int c = 0; c <= cfg.num_users; ++c)
    for (int a = 0; a < cfg.num_tx_antennas; ++a)
      P.cols(a, c) = std::complex<double>(n(rng), n(rng));
  P.cols *= std::sqrt(cfg.total_power) / P.cols.norm();
  return P;
}

/// Term-by-term scalar-loop evaluation of the SINR definitions.
inline void sinr_oracle(const SystemConfig& cfg, const ChannelSample& ch,
                        const BeamMatrix& P, VectorXd& gamma_common,
                        VectorXd& gamma_private) {
  const int K = cfg.num_users;
  const int N = cfg.num_tx_antennas;
  gamma_common.resize(K);
  gamma_private.resize(K);
  for (int k = 0; k < K; ++k) {
    auto inner_abs2 = [&](int col) {
      std::complex<double> acc(0.0, 0.0);
      for (int a = 0; a < N; ++a)
        acc += std::conj(ch.channels(a, k)) * P.cols(a, col);
      return acc.real() * acc.real() + acc.imag() * acc.imag();
    };
    double interference_all = 0.0;
    for (int i = 1; i <= K; ++i) interference_all += inner_abs2(i);
    gamma_common(k) = inner_abs2(0) / (interference_all + cfg.noise_power);
    gamma_private(k) =
        inner_abs2(k + 1) /
        (interference_all - inner_abs2(k + 1) + cfg.noise_power);
  }
}

}  // namespace rsbeam::testutil
