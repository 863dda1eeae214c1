#include "rsbeam/channel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace rsbeam {
namespace {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
  // 53-bit mantissa, in [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller, one pair per call; explicit so draws are bit-reproducible.
std::pair<double, double> normal_pair(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 == 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

}  // namespace

void ChannelParams::validate() const {
  if (!(cell_radius > min_distance && min_distance > 0.0))
    throw std::invalid_argument("ChannelParams: need radius > min_distance > 0");
  if (ref_distance <= 0.0 || pathloss_exponent <= 0.0)
    throw std::invalid_argument("ChannelParams: d_0 and alpha must be > 0");
}

std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t index) {
  return mix64(master_seed ^ mix64(index));
}

ChannelSample generate_channel(const SystemConfig& cfg,
                               const ChannelParams& params,
                               std::uint64_t master_seed,
                               std::uint64_t index) {
  std::mt19937_64 rng(sample_seed(master_seed, index));
  const int nt = cfg.num_tx_antennas;
  const int k_users = cfg.num_users;

  ChannelSample ch;
  ch.channels.resize(nt, k_users);
  ch.large_scale_gains.resize(k_users);
  ch.distances.resize(k_users);

  for (int k = 0; k < k_users; ++k) {
    // area-uniform drop: d = R * sqrt(u), clamped to the exclusion radius
    const double d = std::max(params.min_distance,
                              params.cell_radius * std::sqrt(uniform01(rng)));
    const double rho =
        1.0 / (1.0 + std::pow(d / params.ref_distance,
                              params.pathloss_exponent));
    ch.distances(k) = d;
    ch.large_scale_gains(k) = rho;
    const double scale = std::sqrt(rho / 2.0);  // CN(0,1) entries
    for (int a = 0; a < nt; ++a) {
      const auto [re, im] = normal_pair(rng);
      ch.channels(a, k) = std::complex<double>(scale * re, scale * im);
    }
  }
  return ch;
}

std::vector<ChannelSample> generate_channels(const SystemConfig& cfg,
                                             const ChannelParams& params,
                                             std::size_t n_samples,
                                             std::uint64_t master_seed) {
  params.validate();
  cfg.validate();
  std::vector<ChannelSample> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i)
    out.push_back(generate_channel(cfg, params, master_seed, i));
  return out;
}

}  // namespace rsbeam
