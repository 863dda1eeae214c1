#include "doctest.h"
#include "rsbeam/blackbox.hpp"
#include "test_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace rsbeam;

TEST_CASE("blackbox forward uses the exact power budget and is deterministic") {
  const SystemConfig cfg = SystemConfig::from_snr(4, 3, 20.0);
  const BlackboxModel m = BlackboxModel::init(cfg, BlackboxConfig{}, 7);
  CHECK(m.hidden_dim == 4 * 2 * 3 * 4);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const ChannelSample ch = testutil::random_channel(cfg, rng);
    const BeamMatrix a = blackbox_forward(m, cfg, ch);
    const BeamMatrix b = blackbox_forward(m, cfg, ch);
    CHECK(std::abs(power_used(a) - cfg.total_power) <
          1e-9 * cfg.total_power);
    CHECK((a.cols - b.cols).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("blackbox graph agrees with the plain forward pass") {
  const SystemConfig cfg = SystemConfig::from_snr(3, 2, 20.0);
  const BlackboxModel m = BlackboxModel::init(cfg, BlackboxConfig{}, 17);
  std::mt19937_64 rng(18);
  const ChannelSample ch = testutil::random_channel(cfg, rng);
  const BeamMatrix p = blackbox_forward(m, cfg, ch);
  const MatrixXcd label = testutil::random_feasible_beams(cfg, rng).cols;

  ad::Tape tape;
  const auto params = graph::insert_blackbox_params(tape, m);
  const graph::BlackboxLosses g =
      graph::build_blackbox_sample(tape, m, params, cfg, ch, &label);
  const double plain_unsup = -rate_report(cfg, ch, p).sum_rate;
  const double plain_sup = (p.cols - label).squaredNorm();
  CHECK(std::abs(tape.value(g.unsupervised)(0, 0) - plain_unsup) <
        1e-9 * (1.0 + std::abs(plain_unsup)));
  CHECK(std::abs(tape.value(g.supervised)(0, 0) - plain_sup) <
        1e-9 * (1.0 + plain_sup));
}

TEST_CASE("blackbox gradients match finite differences of the graph") {
  const SystemConfig cfg = SystemConfig::from_snr(2, 2, 15.0);
  BlackboxConfig bcfg;
  bcfg.hidden_multiplier = 1;
  BlackboxModel m = BlackboxModel::init(cfg, bcfg, 27);
  std::mt19937_64 rng(28);
  const ChannelSample ch = testutil::random_channel(cfg, rng);
  const MatrixXcd label = testutil::random_feasible_beams(cfg, rng).cols;

  for (const bool supervised : {true, false}) {
    auto loss_at = [&](const BlackboxModel& model) {
      ad::Tape tape;
      const auto params = graph::insert_blackbox_params(tape, model);
      const graph::BlackboxLosses g =
          graph::build_blackbox_sample(tape, model, params, cfg, ch, &label);
      return tape.value(supervised ? g.supervised : g.unsupervised)(0, 0);
    };
    ad::Tape tape;
    const auto params = graph::insert_blackbox_params(tape, m);
    const graph::BlackboxLosses g =
        graph::build_blackbox_sample(tape, m, params, cfg, ch, &label);
    const auto grads =
        ad::gradient(tape, supervised ? g.supervised : g.unsupervised, params);

    std::mt19937_64 pick(29);
    const double step = 1e-5;
    for (int probe = 0; probe < 10; ++probe) {
      const int pi = static_cast<int>(pick() % 6);
      ad::Matrix* mats[6] = {&m.w1, &m.b1, &m.w2, &m.b2, &m.w3, &m.b3};
      ad::Matrix& mat = *mats[pi];
      const int r = static_cast<int>(pick() % mat.rows());
      const int c = static_cast<int>(pick() % mat.cols());
      const double saved = mat(r, c);
      mat(r, c) = saved + step;
      const double hi = loss_at(m);
      mat(r, c) = saved - step;
      const double lo = loss_at(m);
      mat(r, c) = saved;
      const double fd = (hi - lo) / (2.0 * step);
      const double an = grads[pi](r, c);
      CHECK(std::abs(fd - an) < 1e-4 * (std::abs(fd) + std::abs(an)) + 1e-7);
    }
  }
}

TEST_CASE("blackbox serialization round-trips exactly and rejects damage") {
  const SystemConfig cfg = SystemConfig::from_snr(2, 2, 20.0);
  BlackboxConfig bcfg;
  bcfg.hidden_multiplier = 2;
  const BlackboxModel m = BlackboxModel::init(cfg, bcfg, 37);
  const std::string path = "test_blackbox_roundtrip.bin";
  save_blackbox(path, m);
  const BlackboxModel r = load_blackbox(path);
  CHECK(r.num_users == m.num_users);
  CHECK(r.num_tx_antennas == m.num_tx_antennas);
  CHECK(r.hidden_dim == m.hidden_dim);
  CHECK((r.w1 - m.w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.w2 - m.w2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.w3 - m.w3).cwiseAbs().maxCoeff() == 0.0);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  CHECK_THROWS_AS(load_blackbox(path), FileFormatError);
  std::remove(path.c_str());

  const std::string bad = "test_blackbox_bad.bin";
  {
    std::ofstream os(bad, std::ios::binary);
    os << "WRONGMAGICFILE";
  }
  CHECK_THROWS_AS(load_blackbox(bad), FileFormatError);
  std::remove(bad.c_str());
}

TEST_CASE("blackbox two-phase training runs and is deterministic") {
  const SystemConfig cfg = SystemConfig::from_snr(2, 2, 20.0);
  const std::vector<ChannelSample> samples =
      generate_channels(cfg, ChannelParams{}, 10, 4321);

  BeamLabels labels;
  labels.num_users = 2;
  labels.num_tx_antennas = 2;
  labels.dataset_seed = 4321;
  for (const ChannelSample& ch : samples) {
    const SolveResult r = fp_hfpi_solve(cfg, ch, HfpiConfig{});
    labels.entries.push_back({r.diag.converged, r.beams.cols});
  }

  TrainConfig tcfg;
  tcfg.batch_size = 8;
  tcfg.accumulation_chunk = 4;
  tcfg.learning_rate = 1e-3;
  tcfg.supervised_epochs = 2;
  tcfg.unsupervised_epochs = 2;

  BlackboxConfig bcfg;
  bcfg.hidden_multiplier = 1;
  BlackboxModel a = BlackboxModel::init(cfg, bcfg, 47);
  BlackboxModel b = a;
  const TrainHistory ha = train_blackbox(a, cfg, samples, labels, tcfg);
  const TrainHistory hb = train_blackbox(b, cfg, samples, labels, tcfg);
  REQUIRE(!ha.epochs.empty());
  for (const EpochRecord& rec : ha.epochs) {
    CHECK(std::isfinite(rec.train_loss));
    CHECK(std::isfinite(rec.val_loss));
  }
  REQUIRE(ha.epochs.size() == hb.epochs.size());
  for (std::size_t e = 0; e < ha.epochs.size(); ++e)
    CHECK(ha.epochs[e].train_loss == hb.epochs[e].train_loss);
  CHECK((a.w1 - b.w1).cwiseAbs().maxCoeff() == 0.0);
}
