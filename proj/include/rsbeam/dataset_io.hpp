// Binary dataset / label files.  Layout (all little-endian):
//   dataset: magic "RSBEAMv1", K u32, N_t u32, sample_count u64,
//            snr_db f64, seed u64, cell_radius f64, d0 f64, alpha f64,
//            min_distance f64; then per sample 2*K*N_t f64 (Re of H
//            user-major row-major, then Im), K f64 distances, K f64 gains.
//   dual labels: magic "RSLBL_v1", K u32, sample_count u64, dataset seed
//            u64; per sample u8 valid, (K+1) f64 xi_first, (K+1) f64 xi_last.
//   beam labels: magic "RSPLBLv1", K u32, N_t u32, sample_count u64,
//            dataset seed u64; per sample u8 valid, 2*N_t*(K+1) f64
//            (Re of P column-major, then Im).
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rsbeam/channel.hpp"
#include "rsbeam/core.hpp"
#include "rsbeam/fp_obs.hpp"

namespace rsbeam {

struct Dataset {
  SystemConfig cfg;
  ChannelParams params;
  std::uint64_t seed = 0;
  std::vector<ChannelSample> samples;
};

struct DualLabel {
  bool valid = false;
  VectorXd xi_first;  // [lambda, mu], length K+1
  VectorXd xi_last;
};

struct DualLabels {
  std::uint32_t num_users = 0;
  std::uint64_t dataset_seed = 0;
  std::vector<DualLabel> entries;
};

struct BeamLabel {
  bool valid = false;
  MatrixXcd beams;  // N_t x (K+1)
};

struct BeamLabels {
  std::uint32_t num_users = 0;
  std::uint32_t num_tx_antennas = 0;
  std::uint64_t dataset_seed = 0;
  std::vector<BeamLabel> entries;
};

/// Malformed or truncated file; message names the byte offset.
class FileFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

void write_dual_labels(const std::string& path, const DualLabels& labels);
DualLabels read_dual_labels(const std::string& path);

void write_beam_labels(const std::string& path, const BeamLabels& labels);
BeamLabels read_beam_labels(const std::string& path);

}  // namespace rsbeam
