#include "doctest.h"
#include "rsbeam/bench.hpp"
#include "test_util.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace rsbeam;

namespace {

Dataset tiny_dataset(int nt, int k, double snr_db, int n,
                     std::uint64_t seed) {
  Dataset ds;
  ds.cfg = SystemConfig::from_snr(nt, k, snr_db);
  ds.seed = seed;
  ds.samples = generate_channels(ds.cfg, ds.params, n, seed);
  return ds;
}

}  // namespace

TEST_CASE("label generation: invariants, K=1 simplex point, determinism") {
  const Dataset ds = tiny_dataset(2, 1, 15.0, 6, 99);
  const LabelGenResult a = generate_labels(ds, HfpiConfig{});
  const LabelGenResult b = generate_labels(ds, HfpiConfig{});
  REQUIRE(a.duals.entries.size() == 6);
  REQUIRE(a.beams.entries.size() == 6);
  for (std::size_t i = 0; i < a.duals.entries.size(); ++i) {
    const DualLabel& lab = a.duals.entries[i];
    if (!lab.valid) continue;
    CHECK(lab.xi_first(0) == 1.0);  // K=1: lambda is always (1)
    CHECK(lab.xi_last(0) == 1.0);
    CHECK(lab.xi_first(1) > 0.0);
    CHECK(lab.xi_last(1) > 0.0);
    // bit-identical rerun
    CHECK((lab.xi_last - b.duals.entries[i].xi_last).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((a.beams.entries[i].beams - b.beams.entries[i].beams)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("label generation at K=2 keeps the simplex invariant") {
  const Dataset ds = tiny_dataset(2, 2, 20.0, 5, 7);
  const LabelGenResult r = generate_labels(ds, HfpiConfig{});
  for (const DualLabel& lab : r.duals.entries) {
    if (!lab.valid) continue;
    CHECK(std::abs(lab.xi_first.head(2).sum() - 1.0) < 1e-9);
    CHECK(std::abs(lab.xi_last.head(2).sum() - 1.0) < 1e-9);
    CHECK(lab.xi_first.head(2).minCoeff() > 0.0);
    CHECK(lab.xi_last.head(2).minCoeff() > 0.0);
  }
  CHECK(r.excluded >= 0);
}

TEST_CASE("benchmark rows are deterministic in SR and carry iteration stats") {
  const Dataset ds = tiny_dataset(2, 2, 20.0, 6, 13);
  const BenchRow a = bench_fp_hfpi(ds.cfg, ds.samples, HfpiConfig{});
  const BenchRow b = bench_fp_hfpi(ds.cfg, ds.samples, HfpiConfig{});
  CHECK(a.scheme == "fp-hfpi");
  CHECK(a.num_users == 2);
  CHECK(a.num_tx_antennas == 2);
  CHECK(a.mean_sr == b.mean_sr);  // identical to the bit
  CHECK(a.std_sr == b.std_sr);
  CHECK(a.mean_time_s > 0.0);
  CHECK(a.median_time_s > 0.0);
  CHECK(a.extra.find("mean_outer=") != std::string::npos);
  CHECK(a.extra.find("converged=") != std::string::npos);
}

TEST_CASE("learned-scheme benchmark rows report the model geometry") {
  const Dataset ds = tiny_dataset(2, 2, 20.0, 5, 17);
  const UnfoldModel um = UnfoldModel::init(ds.cfg, UnfoldConfig{2, 8}, 1);
  const BenchRow ur = bench_rsbnn(ds.cfg, ds.samples, um);
  CHECK(ur.scheme == "rs-bnn");
  CHECK(ur.extra == "layers=2;hidden=8");
  CHECK(std::isfinite(ur.mean_sr));

  BlackboxConfig bcfg;
  bcfg.hidden_multiplier = 1;
  const BlackboxModel bm = BlackboxModel::init(ds.cfg, bcfg, 2);
  const BenchRow br = bench_blackbox(ds.cfg, ds.samples, bm);
  CHECK(br.scheme == "blackbox-mlp");
  CHECK(std::isfinite(br.mean_sr));
}

TEST_CASE("benchmark CSV is schema-versioned and append-safe") {
  const std::string path = "test_bench.csv";
  std::remove(path.c_str());
  BenchRow row;
  row.scheme = "fp-hfpi";
  row.num_users = 2;
  row.num_tx_antennas = 2;
  row.snr_db = 20.0;
  row.mean_sr = 1.5;
  row.extra = "mean_outer=3";
  append_bench_csv(path, {row});
  row.scheme = "rs-bnn";
  append_bench_csv(path, {row});

  std::ifstream is(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);  // schema, header, two rows
  CHECK(lines[0] == "# rsbeam-bench-csv-v1");
  CHECK(lines[1].rfind("scheme,k,nt,snr_db", 0) == 0);
  CHECK(lines[2].rfind("fp-hfpi,2,2,20", 0) == 0);
  CHECK(lines[3].rfind("rs-bnn,2,2,20", 0) == 0);
  std::remove(path.c_str());

  // a foreign file must be rejected, not appended to
  const std::string foreign = "test_bench_foreign.csv";
  {
    std::ofstream os(foreign);
    os << "some,other,data\n";
  }
  CHECK_THROWS_AS(append_bench_csv(foreign, {row}), FileFormatError);
  std::remove(foreign.c_str());
}

TEST_CASE("benchmark rejects an empty sample set") {
  const SystemConfig cfg = SystemConfig::from_snr(2, 2, 20.0);
  CHECK_THROWS_AS(bench_fp_hfpi(cfg, {}, HfpiConfig{}),
                  std::invalid_argument);
}
