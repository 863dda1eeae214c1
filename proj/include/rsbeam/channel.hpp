// Random user drops and Rayleigh fading with large-scale path loss:
// h_k = sqrt(rho_k) h~_k, rho_k = 1 / (1 + (d_k/d_0)^alpha).
#pragma once

#include <cstdint>
#include <vector>

#include "rsbeam/core.hpp"

namespace rsbeam {

struct ChannelParams {
  double cell_radius = 100.0;   // meters
  double ref_distance = 30.0;   // d_0
  double pathloss_exponent = 3.0;
  double min_distance = 1.0;

  void validate() const;
};

/// Deterministic per-sample seed so generation is order- and
/// parallelism-independent.
std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t index);

ChannelSample generate_channel(const SystemConfig& cfg,
                               const ChannelParams& params,
                               std::uint64_t master_seed,
                               std::uint64_t index);

std::vector<ChannelSample> generate_channels(const SystemConfig& cfg,
                                             const ChannelParams& params,
                                             std::size_t n_samples,
                                             std::uint64_t master_seed);

}  // namespace rsbeam
