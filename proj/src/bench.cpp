#include "rsbeam/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace rsbeam {

LabelGenResult generate_labels(const Dataset& ds, const HfpiConfig& hcfg) {
  LabelGenResult out;
  out.duals.num_users = static_cast<std::uint32_t>(ds.cfg.num_users);
  out.duals.dataset_seed = ds.seed;
  out.beams.num_users = static_cast<std::uint32_t>(ds.cfg.num_users);
  out.beams.num_tx_antennas = static_cast<std::uint32_t>(ds.cfg.num_tx_antennas);
  out.beams.dataset_seed = ds.seed;
  for (const ChannelSample& ch : ds.samples) {
    const SolveResult r = fp_hfpi_solve(ds.cfg, ch, hcfg);
    DualLabel dual;
    BeamLabel beam;
    dual.valid = beam.valid = r.diag.converged;
    if (!r.diag.converged) ++out.excluded;
    dual.xi_first = r.diag.duals_first.concat();
    dual.xi_last = r.diag.duals_last.concat();
    beam.beams = r.beams.cols;
    out.duals.entries.push_back(std::move(dual));
    out.beams.entries.push_back(std::move(beam));
  }
  return out;
}

namespace {

constexpr int kWarmup = 3;

struct TimedStats {
  double mean_sr = 0.0, std_sr = 0.0, mean_time = 0.0, median_time = 0.0;
};

TimedStats run_timed(const SystemConfig& cfg,
                     const std::vector<ChannelSample>& samples,
                     const std::function<BeamMatrix(const ChannelSample&)>& f) {
  if (samples.empty())
    throw std::invalid_argument("benchmark: empty sample set");
  std::vector<double> srs, times;
  const int warmup = std::min<int>(kWarmup, static_cast<int>(samples.size()) - 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const BeamMatrix p = f(samples[i]);
    const auto t1 = std::chrono::steady_clock::now();
    srs.push_back(rate_report(cfg, samples[i], p).sum_rate);
    if (static_cast<int>(i) >= warmup)
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  TimedStats s;
  double sum = 0.0;
  for (const double v : srs) sum += v;
  s.mean_sr = sum / srs.size();
  double var = 0.0;
  for (const double v : srs) var += (v - s.mean_sr) * (v - s.mean_sr);
  s.std_sr = std::sqrt(var / srs.size());
  double tsum = 0.0;
  for (const double v : times) tsum += v;
  s.mean_time = tsum / times.size();
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  s.median_time =
      (n % 2 == 1) ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  return s;
}

BenchRow make_row(const SystemConfig& cfg, const std::string& scheme,
                  const TimedStats& s, std::string extra) {
  BenchRow row;
  row.scheme = scheme;
  row.num_users = cfg.num_users;
  row.num_tx_antennas = cfg.num_tx_antennas;
  row.snr_db = cfg.snr_db;
  row.mean_sr = s.mean_sr;
  row.std_sr = s.std_sr;
  row.mean_time_s = s.mean_time;
  row.median_time_s = s.median_time;
  row.extra = std::move(extra);
  return row;
}

}  // namespace

BenchRow bench_fp_hfpi(const SystemConfig& cfg,
                       const std::vector<ChannelSample>& samples,
                       const HfpiConfig& hcfg) {
  long outer = 0, inner = 0;
  int converged = 0;
  const TimedStats s =
      run_timed(cfg, samples, [&](const ChannelSample& ch) {
        const SolveResult r = fp_hfpi_solve(cfg, ch, hcfg);
        outer += r.diag.outer_iters;
        for (const int it : r.diag.inner_iters_per_outer) inner += it;
        if (r.diag.converged) ++converged;
        return r.beams;
      });
  std::ostringstream extra;
  extra << "mean_outer=" << static_cast<double>(outer) / samples.size()
        << ";mean_inner_per_outer="
        << (outer > 0 ? static_cast<double>(inner) / outer : 0.0)
        << ";converged=" << converged << "/" << samples.size();
  return make_row(cfg, "fp-hfpi", s, extra.str());
}

BenchRow bench_rsbnn(const SystemConfig& cfg,
                     const std::vector<ChannelSample>& samples,
                     const UnfoldModel& model) {
  const TimedStats s = run_timed(cfg, samples, [&](const ChannelSample& ch) {
    return unfold_forward(model, cfg, ch);
  });
  std::ostringstream extra;
  extra << "layers=" << model.num_layers << ";hidden=" << model.hidden_dim;
  return make_row(cfg, "rs-bnn", s, extra.str());
}

BenchRow bench_blackbox(const SystemConfig& cfg,
                        const std::vector<ChannelSample>& samples,
                        const BlackboxModel& model) {
  const TimedStats s = run_timed(cfg, samples, [&](const ChannelSample& ch) {
    return blackbox_forward(model, cfg, ch);
  });
  std::ostringstream extra;
  extra << "hidden=" << model.hidden_dim;
  return make_row(cfg, "blackbox-mlp", s, extra.str());
}

void append_bench_csv(const std::string& path,
                      const std::vector<BenchRow>& rows) {
  static const std::string kSchema = "# rsbeam-bench-csv-v1";
  static const std::string kHeader =
      "scheme,k,nt,snr_db,mean_sr,std_sr,mean_time_s,median_time_s,extra";
  bool fresh = true;
  {
    std::ifstream is(path);
    std::string first;
    if (is && std::getline(is, first) && !first.empty()) {
      if (first != kSchema)
        throw FileFormatError("benchmark CSV schema mismatch in " + path);
      fresh = false;
    }
  }
  std::ofstream os(path, std::ios::app);
  if (!os) throw FileFormatError("cannot open benchmark CSV: " + path);
  if (fresh) os << kSchema << "\n" << kHeader << "\n";
  os.precision(12);
  for (const BenchRow& r : rows)
    os << r.scheme << "," << r.num_users << "," << r.num_tx_antennas << ","
       << r.snr_db << "," << r.mean_sr << "," << r.std_sr << ","
       << r.mean_time_s << "," << r.median_time_s << "," << r.extra << "\n";
  if (!os) throw FileFormatError("write failed for benchmark CSV: " + path);
}

}  // namespace rsbeam
