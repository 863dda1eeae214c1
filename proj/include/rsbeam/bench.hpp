// Label generation (solver dual variables and beamformers) and the
// single-threaded benchmark harness emitting CSV rows.
#pragma once

#include <string>
#include <vector>

#include "rsbeam/blackbox.hpp"
#include "rsbeam/dataset_io.hpp"
#include "rsbeam/hfpi.hpp"
#include "rsbeam/rsbnn.hpp"

namespace rsbeam {

struct LabelGenResult {
  DualLabels duals;    // xi after the first AO iteration and at convergence
  BeamLabels beams;    // final solver beamformers
  int excluded = 0;    // non-converged samples, flagged invalid
};

/// Runs fp_hfpi_solve on every sample. Non-converged samples stay in the
/// label files with valid = false so indices keep lining up.
LabelGenResult generate_labels(const Dataset& ds, const HfpiConfig& hcfg);

struct BenchRow {
  std::string scheme;
  int num_users = 0;
  int num_tx_antennas = 0;
  double snr_db = 0.0;
  double mean_sr = 0.0;
  double std_sr = 0.0;
  double mean_time_s = 0.0;
  double median_time_s = 0.0;
  std::string extra;
};

/// Per-sample wall time around the pure solve/inference call, with the
/// first few samples treated as warm-up and excluded from the time stats
/// (never from the SR stats).
BenchRow bench_fp_hfpi(const SystemConfig& cfg,
                       const std::vector<ChannelSample>& samples,
                       const HfpiConfig& hcfg);
BenchRow bench_rsbnn(const SystemConfig& cfg,
                     const std::vector<ChannelSample>& samples,
                     const UnfoldModel& model);
BenchRow bench_blackbox(const SystemConfig& cfg,
                        const std::vector<ChannelSample>& samples,
                        const BlackboxModel& model);

/// Appends rows to a schema-versioned CSV, writing the header on first
/// use and rejecting files with a different schema line.
void append_bench_csv(const std::string& path,
                      const std::vector<BenchRow>& rows);

}  // namespace rsbeam
