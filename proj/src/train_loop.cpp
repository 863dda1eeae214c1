#include "train_loop.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace rsbeam::detail {

namespace {

void accumulate(std::vector<ad::Matrix>& into,
                const std::vector<ad::Matrix>& grads) {
  if (into.empty()) {
    into = grads;
    return;
  }
  for (std::size_t i = 0; i < grads.size(); ++i) into[i] += grads[i];
}

}  // namespace

TrainHistory run_two_phase(const TrainConfig& tcfg,
                           const std::vector<int>& usable,
                           const TrainHooks& hooks) {
  if (tcfg.batch_size < 1 || tcfg.accumulation_chunk < 1)
    throw std::invalid_argument("train: invalid batch configuration");
  if (usable.size() < 2)
    throw std::invalid_argument("train: fewer than two usable samples");

  const int n_val = std::max(1, static_cast<int>(usable.size() / 5));
  const int n_train = static_cast<int>(usable.size()) - n_val;
  if (n_train < 1) throw std::invalid_argument("train: empty training split");
  std::vector<int> train_idx(usable.begin(), usable.begin() + n_train);
  const std::vector<int> val_idx(usable.begin() + n_train, usable.end());

  auto evaluate = [&](const std::vector<int>& idx, bool supervised,
                      double* mean_sr) {
    double total = 0.0, sr_total = 0.0;
    for (const int i : idx) {
      double sr = 0.0;
      total += hooks.plain_eval(i, supervised, &sr);
      sr_total += sr;
    }
    if (mean_sr) *mean_sr = sr_total / idx.size();
    return total / idx.size();
  };

  TrainHistory history;
  std::mt19937_64 shuffle_rng(tcfg.seed);

  auto run_phase = [&](int phase, int max_epochs) {
    const bool supervised = phase == 1;
    std::vector<ad::Matrix> weights = hooks.get_weights();
    ad::AdamState adam;
    ad::AdamConfig acfg;
    acfg.lr = tcfg.learning_rate;

    double best_val = evaluate(val_idx, supervised, nullptr);
    std::vector<ad::Matrix> best_weights = weights;
    int stall = 0;

    for (int epoch = 0; epoch < max_epochs; ++epoch) {
      std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
      double epoch_loss = 0.0;
      for (int start = 0; start < n_train; start += tcfg.batch_size) {
        const int batch = std::min(tcfg.batch_size, n_train - start);
        std::vector<ad::Matrix> grads;
        for (int cstart = 0; cstart < batch;
             cstart += tcfg.accumulation_chunk) {
          const int chunk = std::min(tcfg.accumulation_chunk, batch - cstart);
          ad::Tape tape;
          const std::vector<ad::Var> params = hooks.insert_params(tape);
          ad::Var total;
          for (int s = 0; s < chunk; ++s) {
            const ad::Var term = hooks.sample_loss(
                tape, params, train_idx[start + cstart + s], supervised);
            total = (s == 0) ? term : ad::add(total, term);
          }
          epoch_loss += tape.value(total)(0, 0);
          accumulate(grads, ad::gradient(tape, total, params));
        }
        for (auto& g : grads) g /= static_cast<double>(batch);
        ad::adam_step(weights, grads, adam, acfg);
        hooks.set_weights(weights);
      }

      EpochRecord rec;
      rec.phase = phase;
      rec.train_loss = epoch_loss / n_train;
      rec.val_loss = evaluate(val_idx, supervised, &rec.val_mean_sr);
      history.epochs.push_back(rec);
      if (phase == 1) ++history.phase1_epochs;

      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best_weights = weights;
        stall = 0;
      } else if (++stall >= tcfg.patience) {
        break;
      }
    }
    hooks.set_weights(best_weights);
  };

  run_phase(1, tcfg.supervised_epochs);

  // keep the phase-1 weights unless phase 2 improves the phase-2
  // objective on the training split
  const std::vector<ad::Matrix> phase1_weights = hooks.get_weights();
  const double phase1_train_unsup = evaluate(train_idx, false, nullptr);
  run_phase(2, tcfg.unsupervised_epochs);
  if (evaluate(train_idx, false, nullptr) > phase1_train_unsup)
    hooks.set_weights(phase1_weights);

  return history;
}

}  // namespace rsbeam::detail
