// Deep-unfolded beamforming network: L unfolded iterations, each predicting
// the dual variables with a one-hidden-layer network, forming the
// closed-form beamformers and rectifying the power.  A dedicated layer-0
// network produces the initial dual prediction xi^[0].
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsbeam/autodiff.hpp"
#include "rsbeam/dataset_io.hpp"
#include "rsbeam/fp_obs.hpp"
#include "rsbeam/hfpi.hpp"

namespace rsbeam {

struct UnfoldConfig {
  int num_layers = 5;    // L
  int hidden_dim = 512;  // M
  double epsilon = 0.01; // lambda floor constant
  bool detach_aux = false;
};

struct DenseLayer {
  ad::Matrix w1, b1, w2, b2;
};

struct UnfoldModel {
  int num_users = 0;
  int num_tx_antennas = 0;
  int num_layers = 0;
  int hidden_dim = 0;
  double epsilon = 0.01;
  bool detach_aux = false;           // training-time switch, not serialized
  std::vector<DenseLayer> layers;    // size L+1; index 0 predicts xi^[0]

  /// D = 2KN_t + 2(K+1)N_t + (K+1)
  int feature_dim() const {
    return 2 * num_users * num_tx_antennas +
           2 * (num_users + 1) * num_tx_antennas + num_users + 1;
  }

  static UnfoldModel init(const SystemConfig& cfg, const UnfoldConfig& ucfg,
                          std::uint64_t seed);
};

void save_model(const std::string& path, const UnfoldModel& model);
UnfoldModel load_model(const std::string& path);

/// [Re(H), Im(H), Re(P_prev), Im(P_prev), lambda, mu]; H user-major
/// row-major, P column-major.
VectorXd build_features(const ChannelSample& ch, const BeamMatrix& p_prev,
                        const VectorXd& xi_prev);

struct LayerOutput {
  VectorXd lambda_raw;  // sigmoid outputs, length K
  double mu = 0.0;      // |raw| + 1e-6
};

LayerOutput layer_forward(const UnfoldModel& model, int layer,
                          const VectorXd& features);

/// lambda_k = (raw_k + eps) / (sum_j raw_j + K eps)
VectorXd normalize_lambda(const VectorXd& lambda_raw, double epsilon);

/// P = sqrt(P_t / tr(P' P'^H)) P'; rejects P' = 0.
BeamMatrix rectify_power(const BeamMatrix& p, double total_power);

struct UnfoldTrace {
  std::vector<VectorXd> xis;     // xi^[0] .. xi^[L], each [lambda, mu]
  std::vector<BeamMatrix> beams; // P^[0] .. P^[L]
};

/// Plain (tape-free) forward pass; P^[0] shared with FP-HFPI.
BeamMatrix unfold_forward(const UnfoldModel& model, const SystemConfig& cfg,
                          const ChannelSample& ch,
                          UnfoldTrace* trace = nullptr);

double supervised_loss(const UnfoldTrace& trace, const VectorXd& xi_first,
                       const VectorXd& xi_last);
double unsupervised_loss(const SystemConfig& cfg, const ChannelSample& ch,
                         const BeamMatrix& p_final);

// ---- differentiable pipeline ----------------------------------------

namespace graph {

/// Model parameters inserted on a tape, order W1,b1,W2,b2 per layer.
std::vector<ad::Var> insert_params(ad::Tape& tape, const UnfoldModel& model);

struct SampleLosses {
  ad::Var supervised;    // only if labels were given
  ad::Var unsupervised;  // -SR(P^[L])
  std::vector<ad::Var> xi;  // xi^[0] .. xi^[L], each (K+1)x1
};

/// Full unfolded pipeline for one sample on the tape.  `params` must come
/// from insert_params with the same model metadata.
SampleLosses build_sample(ad::Tape& tape, const UnfoldModel& model,
                          const std::vector<ad::Var>& params,
                          const SystemConfig& cfg, const ChannelSample& ch,
                          const VectorXd* xi_first = nullptr,
                          const VectorXd* xi_last = nullptr);

/// Sum rate of the K+1 complex beam columns as a tape expression.
ad::Var sum_rate(ad::Tape& tape, const SystemConfig& cfg,
                 const ChannelSample& ch, const std::vector<ad::CVar>& p);

}  // namespace graph

// ---- training --------------------------------------------------------

struct TrainConfig {
  int batch_size = 1000;
  double learning_rate = 1e-4;
  int supervised_epochs = 50;
  int unsupervised_epochs = 150;
  int patience = 7;
  std::uint64_t seed = 1;
  int accumulation_chunk = 64;  // tape size cap; gradients accumulate across chunks
};

struct EpochRecord {
  int phase = 1;  // 1 supervised, 2 unsupervised
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mean_sr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int phase1_epochs = 0;
};

/// Two-phase training: supervised on dual-variable labels, then
/// unsupervised on -SR.  The last 20% of the sample list is the
/// validation split; early stop per phase on the validation loss.
TrainHistory train(UnfoldModel& model, const SystemConfig& cfg,
                   const std::vector<ChannelSample>& samples,
                   const DualLabels& labels, const TrainConfig& tcfg);

}  // namespace rsbeam
