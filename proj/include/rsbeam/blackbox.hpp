// Dense black-box baseline: a plain MLP mapping the channel directly to
// the stacked beamforming matrix, with power rectification as the output
// activation.  Trained in the same two phases as the unfolded network,
// with supervision on solver beamformers instead of dual variables.
#pragma once

#include "rsbeam/rsbnn.hpp"

namespace rsbeam {

struct BlackboxConfig {
  int hidden_multiplier = 4;  // hidden width = multiplier * input dim
};

struct BlackboxModel {
  int num_users = 0;
  int num_tx_antennas = 0;
  int hidden_dim = 0;
  ad::Matrix w1, b1, w2, b2, w3, b3;  // two relu hidden layers

  int input_dim() const { return 2 * num_users * num_tx_antennas; }
  int output_dim() const { return 2 * num_tx_antennas * (num_users + 1); }

  static BlackboxModel init(const SystemConfig& cfg,
                            const BlackboxConfig& bcfg, std::uint64_t seed);
};

void save_blackbox(const std::string& path, const BlackboxModel& model);
BlackboxModel load_blackbox(const std::string& path);

/// Channel features [Re(H), Im(H)], user-major.
VectorXd blackbox_features(const ChannelSample& ch);

/// Plain forward pass; the output always satisfies tr(P P^H) = P_t.
BeamMatrix blackbox_forward(const BlackboxModel& model,
                            const SystemConfig& cfg, const ChannelSample& ch);

namespace graph {

std::vector<ad::Var> insert_blackbox_params(ad::Tape& tape,
                                            const BlackboxModel& model);

struct BlackboxLosses {
  ad::Var supervised;    // squared error against the label beams, if given
  ad::Var unsupervised;  // -SR of the rectified output
};

BlackboxLosses build_blackbox_sample(ad::Tape& tape,
                                     const BlackboxModel& model,
                                     const std::vector<ad::Var>& params,
                                     const SystemConfig& cfg,
                                     const ChannelSample& ch,
                                     const MatrixXcd* label_beams = nullptr);

}  // namespace graph

/// Two-phase training against beamformer labels; same loop, splits, and
/// early stopping as the unfolded network's trainer.
TrainHistory train_blackbox(BlackboxModel& model, const SystemConfig& cfg,
                            const std::vector<ChannelSample>& samples,
                            const BeamLabels& labels, const TrainConfig& tcfg);

}  // namespace rsbeam
