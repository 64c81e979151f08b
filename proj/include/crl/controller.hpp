#pragma once

#include <cstdint>
#include <vector>

#include "crl/nn.hpp"
#include "crl/rng.hpp"
#include "crl/tape.hpp"
#include "crl/tensor.hpp"

namespace crl {

enum class ActionKind : std::uint8_t { Halt = 0, Reduce = 1, Translate = 2 };

const char* kind_name(ActionKind k);

// One sampled hierarchical action. The joint log-probability sums exactly
// the component choices that were sampled.
struct ActionSample {
  ActionKind kind = ActionKind::Reduce;
  int module = 0;
  int window = -1;  // reduce only; -1 when no window exists
  double logp = 0.0;
  double entropy = 0.0;
  double value = 0.0;
};

struct ControllerConfig {
  int vocab_width = 13;
  int target_dim = 0;  // 5 for multilingual, 0 for numerical
  int hidden = 128;
  int reducers = 1;
  int translators = 0;
  bool allow_halt = true;  // infinite-horizon runs expose HALT
  bool shared_encoder = true;
  bool operator_windows = false;  // restrict reduce windows to operator-centered
};

// Recurrent encoder over token rows (target one-hot concatenated at every
// position), hierarchical action heads, per-window scorer, value head. The
// action-type head is sized to the kinds available in this run, so the
// distribution is well-formed without masking.
struct ControllerParams {
  ControllerConfig cfg;
  std::vector<ActionKind> kinds;
  ParamSet params;
  GruParamIds enc{};
  GruParamIds value_enc{};  // used when !shared_encoder
  int w_kind = -1, b_kind = -1;
  int w_red = -1, b_red = -1;
  int w_tr = -1, b_tr = -1;
  int w_win = -1, b_win = -1;
  int w_val = -1, b_val = -1;

  int kind_index(ActionKind k) const;
};

ControllerParams init_controller(const ControllerConfig& cfg, SeededRng& rng);

// Reduce-window starts; operator_centered keeps only windows whose middle
// token argmax-decodes to an operator.
std::vector<int> window_candidates(const Tensor& state, bool operator_centered);

// Head log-distributions for one state (plain path). Probabilities for
// sampling are exp(logp), so the plain and tape paths agree bit for bit.
struct ControllerDists {
  std::vector<double> kind_logp;
  std::vector<double> red_logp;
  std::vector<double> tr_logp;
  std::vector<double> win_logp;   // aligned with candidates
  std::vector<int> candidates;
  double value = 0.0;
};

// target must be a 1 x target_dim one-hot (ignored when target_dim == 0).
ControllerDists controller_forward(const ControllerParams& ctrl, const Tensor& state,
                                   const Tensor& target);

ActionSample sample_action(const ControllerParams& ctrl, const ControllerDists& dists,
                           bool greedy, SeededRng& rng);

// Joint entropy of the hierarchical policy at this state.
double dists_entropy(const ControllerParams& ctrl, const ControllerDists& dists);

// Differentiable (log-prob, entropy, value) nodes for a stored action.
struct ControllerEvalNodes {
  int logp = -1;
  int entropy = -1;
  int value = -1;
};

ControllerEvalNodes controller_eval_tape(Tape& tape, const TapeParams& tp,
                                         const ControllerParams& ctrl,
                                         const Tensor& state, const Tensor& target,
                                         const ActionSample& action);

// Order-of-operations controller for the hardcoded-controller ablation:
// leftmost * window if any, else leftmost operator window, HALT on a single
// token or a malformed state. Module id 0.
ActionSample hardcoded_controller_action(const Tensor& state);

}  // namespace crl
