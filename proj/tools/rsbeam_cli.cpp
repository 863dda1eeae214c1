// Command-line front end: dataset generation, label generation, solving,
// training, and benchmarking.
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rsbeam/bench.hpp"
#include "rsbeam/blackbox.hpp"
#include "rsbeam/dataset_io.hpp"
#include "rsbeam/rsbnn.hpp"

namespace {

using namespace rsbeam;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct TrainFlags {
  int batch = 1000;
  double lr = 1e-4;
  int sup_epochs = 50;
  int unsup_epochs = 150;
  int patience = 7;
  std::uint64_t seed = 1;
  int chunk = 64;

  void attach(CLI::App* cmd) {
    cmd->add_option("--batch", batch, "Batch size");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--sup-epochs", sup_epochs, "Supervised epoch budget");
    cmd->add_option("--unsup-epochs", unsup_epochs,
                    "Unsupervised epoch budget");
    cmd->add_option("--patience", patience, "Early-stopping patience");
    cmd->add_option("--seed", seed, "Training shuffle/init seed");
    cmd->add_option("--chunk", chunk,
                    "Gradient accumulation chunk (tape size cap)");
  }

  TrainConfig to_config() const {
    TrainConfig t;
    t.batch_size = batch;
    t.learning_rate = lr;
    t.supervised_epochs = sup_epochs;
    t.unsupervised_epochs = unsup_epochs;
    t.patience = patience;
    t.seed = seed;
    t.accumulation_chunk = chunk;
    return t;
  }
};

void print_history(const TrainHistory& h) {
  for (std::size_t e = 0; e < h.epochs.size(); ++e) {
    const EpochRecord& r = h.epochs[e];
    std::cout << "epoch " << e + 1 << " phase " << r.phase << " train_loss "
              << r.train_loss << " val_loss " << r.val_loss << " val_mean_sr "
              << r.val_mean_sr << "\n";
  }
  std::cout << "phase-1 epochs: " << h.phase1_epochs
            << ", total epochs: " << h.epochs.size() << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Optimal-structure beamforming for 1-layer rate splitting"};
  app.set_config("--config", "", "key=value config file; flags override");
  app.require_subcommand(1);

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "Generate a channel dataset");
  int k = 4, nt = 4, n_samples = 100;
  double snr_db = 20.0;
  std::uint64_t seed = 1;
  std::string out_path;
  ChannelParams cparams;
  gen->add_option("--k", k, "Number of users")->required();
  gen->add_option("--nt", nt, "Number of transmit antennas")->required();
  gen->add_option("--snr-db", snr_db, "Transmit SNR in dB")->required();
  gen->add_option("--samples", n_samples, "Sample count")->required();
  gen->add_option("--seed", seed, "Master seed")->required();
  gen->add_option("--out", out_path, "Output dataset file")->required();
  gen->add_option("--radius", cparams.cell_radius, "Cell radius in meters");
  gen->add_option("--d0", cparams.ref_distance,
                  "Path-loss reference distance in meters");
  gen->add_option("--alpha", cparams.pathloss_exponent, "Path-loss exponent");
  gen->callback([&] {
    Dataset ds;
    ds.cfg = SystemConfig::from_snr(nt, k, snr_db);
    ds.params = cparams;
    ds.params.validate();
    ds.seed = seed;
    ds.samples = generate_channels(ds.cfg, ds.params, n_samples, seed);
    write_dataset(out_path, ds);
    std::cout << "wrote " << n_samples << " samples (K=" << k << ", N_t=" << nt
              << ", SNR " << snr_db << " dB) to " << out_path << "\n";
  });

  // ---- labels ----
  auto* lab = app.add_subcommand(
      "labels", "Solve every sample and store dual-variable labels");
  std::string lab_data, lab_out, lab_out_beams;
  HfpiConfig lab_hcfg;
  lab->add_option("--data", lab_data, "Dataset file")->required();
  lab->add_option("--out", lab_out, "Dual-label output file")->required();
  lab->add_option("--out-beams", lab_out_beams,
                  "Also store solver beamformer labels here");
  lab->add_option("--rho", lab_hcfg.rho, "HFPI damping constant");
  lab->add_option("--inner-tol", lab_hcfg.inner_tol, "Inner-loop tolerance");
  lab->add_option("--outer-tol", lab_hcfg.outer_tol, "Outer-loop tolerance");
  lab->callback([&] {
    const Dataset ds = read_dataset(lab_data);
    const LabelGenResult r = generate_labels(ds, lab_hcfg);
    write_dual_labels(lab_out, r.duals);
    std::cout << "labeled " << ds.samples.size() << " samples, excluded "
              << r.excluded << " non-converged\n";
    if (!lab_out_beams.empty()) {
      write_beam_labels(lab_out_beams, r.beams);
      std::cout << "beam labels written to " << lab_out_beams << "\n";
    }
  });

  // ---- solve ----
  auto* sol = app.add_subcommand("solve", "Run the model-based solver");
  std::string sol_data, sol_algo = "fp-hfpi", sol_report;
  HfpiConfig sol_hcfg;
  sol->add_option("--data", sol_data, "Dataset file")->required();
  sol->add_option("--algo", sol_algo, "Algorithm (fp-hfpi)");
  sol->add_option("--report", sol_report, "Benchmark CSV to append")
      ->required();
  sol->add_option("--rho", sol_hcfg.rho, "HFPI damping constant");
  sol->add_option("--inner-tol", sol_hcfg.inner_tol, "Inner-loop tolerance");
  sol->add_option("--outer-tol", sol_hcfg.outer_tol, "Outer-loop tolerance");
  sol->callback([&] {
    if (sol_algo != "fp-hfpi")
      throw CLI::ValidationError("--algo", "unknown algorithm: " + sol_algo);
    const Dataset ds = read_dataset(sol_data);
    const BenchRow row = bench_fp_hfpi(ds.cfg, ds.samples, sol_hcfg);
    append_bench_csv(sol_report, {row});
    std::cout << "fp-hfpi mean SR " << row.mean_sr << " bits, mean time "
              << row.mean_time_s << " s (" << row.extra << ")\n";
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train the unfolded network");
  std::string tr_data, tr_labels, tr_model_out;
  UnfoldConfig ucfg;
  TrainFlags tr_flags;
  std::uint64_t tr_init_seed = 1;
  tr->add_option("--data", tr_data, "Dataset file")->required();
  tr->add_option("--labels", tr_labels, "Dual-label file")->required();
  tr->add_option("--model-out", tr_model_out, "Model output file")->required();
  tr->add_option("--layers", ucfg.num_layers, "Unfolded layer count L");
  tr->add_option("--hidden", ucfg.hidden_dim, "Hidden width M");
  tr->add_option("--epsilon", ucfg.epsilon, "Lambda floor constant");
  tr->add_flag("--detach-aux", ucfg.detach_aux,
               "Stop gradients through the auxiliary variables");
  tr_flags.attach(tr);
  tr->callback([&] {
    const Dataset ds = read_dataset(tr_data);
    const DualLabels labels = read_dual_labels(tr_labels);
    if (labels.entries.size() != ds.samples.size() ||
        labels.dataset_seed != ds.seed)
      throw CLI::ValidationError("--labels",
                                 "label file does not match the dataset");
    UnfoldModel model = UnfoldModel::init(ds.cfg, ucfg, tr_flags.seed);
    const TrainHistory h =
        train(model, ds.cfg, ds.samples, labels, tr_flags.to_config());
    print_history(h);
    save_model(tr_model_out, model);
    std::cout << "model written to " << tr_model_out << "\n";
  });

  // ---- train-blackbox ----
  auto* tb = app.add_subcommand("train-blackbox",
                                "Train the dense black-box baseline");
  std::string tb_data, tb_labels, tb_model_out;
  BlackboxConfig bcfg;
  TrainFlags tb_flags;
  tb->add_option("--data", tb_data, "Dataset file")->required();
  tb->add_option("--labels-p", tb_labels, "Beamformer-label file")->required();
  tb->add_option("--model-out", tb_model_out, "Model output file")->required();
  tb->add_option("--hidden-mult", bcfg.hidden_multiplier,
                 "Hidden width as a multiple of the input dimension");
  tb_flags.attach(tb);
  tb->callback([&] {
    const Dataset ds = read_dataset(tb_data);
    const BeamLabels labels = read_beam_labels(tb_labels);
    if (labels.entries.size() != ds.samples.size() ||
        labels.dataset_seed != ds.seed)
      throw CLI::ValidationError("--labels-p",
                                 "label file does not match the dataset");
    BlackboxModel model = BlackboxModel::init(ds.cfg, bcfg, tb_flags.seed);
    const TrainHistory h =
        train_blackbox(model, ds.cfg, ds.samples, labels, tb_flags.to_config());
    print_history(h);
    save_blackbox(tb_model_out, model);
    std::cout << "model written to " << tb_model_out << "\n";
  });

  // ---- bench ----
  auto* be = app.add_subcommand("bench", "Benchmark schemes to CSV");
  std::string be_data, be_schemes = "fp-hfpi", be_models, be_out;
  HfpiConfig be_hcfg;
  be->add_option("--data", be_data, "Dataset file")->required();
  be->add_option("--schemes", be_schemes,
                 "Comma list from fp-hfpi,rs-bnn,blackbox-mlp");
  be->add_option("--models", be_models,
                 "Comma list of model files, one per learned scheme in order");
  be->add_option("--out", be_out, "Benchmark CSV to append")->required();
  be->add_option("--rho", be_hcfg.rho, "HFPI damping constant");
  be->add_option("--inner-tol", be_hcfg.inner_tol, "Inner-loop tolerance");
  be->add_option("--outer-tol", be_hcfg.outer_tol, "Outer-loop tolerance");
  be->callback([&] {
    const Dataset ds = read_dataset(be_data);
    const std::vector<std::string> schemes = split_csv(be_schemes);
    std::vector<std::string> models = split_csv(be_models);
    std::size_t model_pos = 0;
    auto next_model = [&](const std::string& scheme) {
      if (model_pos >= models.size())
        throw CLI::ValidationError(
            "--models", "no model file supplied for scheme " + scheme);
      return models[model_pos++];
    };
    std::vector<BenchRow> rows;
    for (const std::string& scheme : schemes) {
      if (scheme == "fp-hfpi") {
        rows.push_back(bench_fp_hfpi(ds.cfg, ds.samples, be_hcfg));
      } else if (scheme == "rs-bnn") {
        rows.push_back(
            bench_rsbnn(ds.cfg, ds.samples, load_model(next_model(scheme))));
      } else if (scheme == "blackbox-mlp") {
        rows.push_back(bench_blackbox(ds.cfg, ds.samples,
                                      load_blackbox(next_model(scheme))));
      } else {
        throw CLI::ValidationError("--schemes", "unknown scheme: " + scheme);
      }
    }
    append_bench_csv(be_out, rows);
    for (const BenchRow& row : rows)
      std::cout << row.scheme << ": mean SR " << row.mean_sr
                << " bits, mean time " << row.mean_time_s << " s\n";
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
