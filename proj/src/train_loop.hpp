// Internal two-phase training loop shared by the unfolded network and the
// dense baseline.  Phase 1 minimizes a supervised loss, phase 2 the
// negative sum rate; each phase early-stops on a validation split and the
// final weights never do worse than the phase-1 weights on the phase-2
// training objective.
#pragma once

#include <functional>
#include <vector>

#include "rsbeam/rsbnn.hpp"

namespace rsbeam::detail {

struct TrainHooks {
  // loss term for one sample on the tape; supervised selects the phase
  std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&, int,
                        bool supervised)>
      sample_loss;
  // plain-forward loss for one sample; also reports its sum rate
  std::function<double(int, bool supervised, double* sr)> plain_eval;
  std::function<std::vector<ad::Var>(ad::Tape&)> insert_params;
  std::function<std::vector<ad::Matrix>()> get_weights;
  std::function<void(const std::vector<ad::Matrix>&)> set_weights;
};

TrainHistory run_two_phase(const TrainConfig& tcfg,
                           const std::vector<int>& usable,
                           const TrainHooks& hooks);

}  // namespace rsbeam::detail
