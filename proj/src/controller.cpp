#include "crl/controller.hpp"

#include <cmath>

#include "crl/error.hpp"
#include "crl/vocab.hpp"

namespace crl {

const char* kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::Halt:
      return "HALT";
    case ActionKind::Reduce:
      return "REDUCE";
    case ActionKind::Translate:
      return "TRANSLATE";
  }
  return "?";
}

int ControllerParams::kind_index(ActionKind k) const {
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (kinds[i] == k) return static_cast<int>(i);
  }
  fail("internal", std::string("action kind unavailable in this run: ") + kind_name(k));
}

ControllerParams init_controller(const ControllerConfig& cfg, SeededRng& rng) {
  if (cfg.reducers < 1) fail("config", "controller needs at least one reducer");
  ControllerParams ctrl;
  ctrl.cfg = cfg;
  if (cfg.allow_halt) ctrl.kinds.push_back(ActionKind::Halt);
  ctrl.kinds.push_back(ActionKind::Reduce);
  if (cfg.translators > 0) ctrl.kinds.push_back(ActionKind::Translate);

  const int in_dim = cfg.vocab_width + cfg.target_dim;
  const int h = cfg.hidden;
  SeededRng stream = SeededRng::stream(rng.next_u64(), "controller-init");
  ctrl.enc = add_gru_params(ctrl.params, "controller.enc", in_dim, h, stream);
  if (!cfg.shared_encoder) {
    ctrl.value_enc = add_gru_params(ctrl.params, "controller.value_enc", in_dim, h, stream);
  }
  const int n_kinds = static_cast<int>(ctrl.kinds.size());
  ctrl.w_kind = ctrl.params.add("controller.kind.w", init_params(h, n_kinds, InitScheme::UniformXavier, stream));
  ctrl.b_kind = ctrl.params.add("controller.kind.b", init_params(1, n_kinds, InitScheme::Zeros, stream));
  ctrl.w_red = ctrl.params.add("controller.red.w", init_params(h, cfg.reducers, InitScheme::UniformXavier, stream));
  ctrl.b_red = ctrl.params.add("controller.red.b", init_params(1, cfg.reducers, InitScheme::Zeros, stream));
  if (cfg.translators > 0) {
    ctrl.w_tr = ctrl.params.add("controller.tr.w", init_params(h, cfg.translators, InitScheme::UniformXavier, stream));
    ctrl.b_tr = ctrl.params.add("controller.tr.b", init_params(1, cfg.translators, InitScheme::Zeros, stream));
  }
  ctrl.w_win = ctrl.params.add("controller.win.w", init_params(3 * h, 1, InitScheme::UniformXavier, stream));
  ctrl.b_win = ctrl.params.add("controller.win.b", init_params(1, 1, InitScheme::Zeros, stream));
  ctrl.w_val = ctrl.params.add("controller.val.w", init_params(h, 1, InitScheme::UniformXavier, stream));
  ctrl.b_val = ctrl.params.add("controller.val.b", init_params(1, 1, InitScheme::Zeros, stream));
  return ctrl;
}

std::vector<int> window_candidates(const Tensor& state, bool operator_centered) {
  std::vector<int> out;
  if (state.rows < 3) return out;
  const Vocab vocab{state.cols > Vocab::kBlock ? 5 : 1};
  for (int w = 0; w + 2 < state.rows; ++w) {
    if (operator_centered && !vocab.is_operator(argmax_row(state, w + 1))) continue;
    out.push_back(w);
  }
  return out;
}

namespace {

// Per-position inputs with the target one-hot appended; empty target means
// the numerical task (no re-representation objective).
Tensor position_input(const ControllerParams& ctrl, const Tensor& state, int row,
                      const Tensor& target) {
  if (ctrl.cfg.target_dim == 0) return row_of(state, row);
  const Tensor token = row_of(state, row);
  return concat_cols({&token, &target});
}

struct PlainEncode {
  std::vector<Tensor> features;  // one 1 x H row per position
  Tensor summary;
};

PlainEncode encode_plain(const ControllerParams& ctrl, const GruParamIds& gru,
                         const Tensor& state, const Tensor& target) {
  if (state.rows < 1) fail("shape", "controller encode on empty state");
  PlainEncode out;
  Tensor h(1, ctrl.cfg.hidden);
  for (int i = 0; i < state.rows; ++i) {
    const Tensor x = position_input(ctrl, state, i, target);
    h = gru_cell_plain(ctrl.params, gru, x, h);
    out.features.push_back(h);
  }
  out.summary = h;
  return out;
}

std::vector<double> log_softmax_vec(Tensor logits) {
  log_softmax_row_inplace(logits);
  return logits.data;
}

double entropy_of(const std::vector<double>& logp) {
  double h = 0.0;
  for (const double lp : logp) h -= std::exp(lp) * lp;
  return h;
}

int pick(const std::vector<double>& logp, bool greedy, SeededRng& rng) {
  if (greedy) {
    int best = 0;
    for (std::size_t i = 1; i < logp.size(); ++i) {
      if (logp[i] > logp[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
  }
  std::vector<double> probs(logp.size());
  for (std::size_t i = 0; i < logp.size(); ++i) probs[i] = std::exp(logp[i]);
  return rng.categorical(probs);
}

}  // namespace

ControllerDists controller_forward(const ControllerParams& ctrl, const Tensor& state,
                                   const Tensor& target) {
  const PlainEncode enc = encode_plain(ctrl, ctrl.enc, state, target);
  ControllerDists dists;
  dists.kind_logp = log_softmax_vec(
      affine_plain(enc.summary, ctrl.params[ctrl.w_kind], ctrl.params[ctrl.b_kind]));
  dists.red_logp = log_softmax_vec(
      affine_plain(enc.summary, ctrl.params[ctrl.w_red], ctrl.params[ctrl.b_red]));
  if (ctrl.cfg.translators > 0) {
    dists.tr_logp = log_softmax_vec(
        affine_plain(enc.summary, ctrl.params[ctrl.w_tr], ctrl.params[ctrl.b_tr]));
  }
  dists.candidates = window_candidates(state, ctrl.cfg.operator_windows);
  if (!dists.candidates.empty()) {
    Tensor scores(1, static_cast<int>(dists.candidates.size()));
    for (std::size_t i = 0; i < dists.candidates.size(); ++i) {
      const int w = dists.candidates[i];
      const Tensor win = concat_cols({&enc.features[static_cast<std::size_t>(w)],
                                      &enc.features[static_cast<std::size_t>(w + 1)],
                                      &enc.features[static_cast<std::size_t>(w + 2)]});
      scores.at(0, static_cast<int>(i)) =
          affine_plain(win, ctrl.params[ctrl.w_win], ctrl.params[ctrl.b_win]).at(0, 0);
    }
    dists.win_logp = log_softmax_vec(std::move(scores));
  }
  const Tensor& value_summary =
      ctrl.cfg.shared_encoder
          ? enc.summary
          : encode_plain(ctrl, ctrl.value_enc, state, target).summary;
  dists.value =
      affine_plain(value_summary, ctrl.params[ctrl.w_val], ctrl.params[ctrl.b_val]).at(0, 0);
  return dists;
}

double dists_entropy(const ControllerParams& ctrl, const ControllerDists& dists) {
  double h = entropy_of(dists.kind_logp);
  const double p_reduce = std::exp(dists.kind_logp[static_cast<std::size_t>(
      ctrl.kind_index(ActionKind::Reduce))]);
  double h_reduce = entropy_of(dists.red_logp);
  if (!dists.win_logp.empty()) h_reduce += entropy_of(dists.win_logp);
  h += p_reduce * h_reduce;
  if (ctrl.cfg.translators > 0) {
    const double p_tr = std::exp(dists.kind_logp[static_cast<std::size_t>(
        ctrl.kind_index(ActionKind::Translate))]);
    h += p_tr * entropy_of(dists.tr_logp);
  }
  return h;
}

ActionSample sample_action(const ControllerParams& ctrl, const ControllerDists& dists,
                           bool greedy, SeededRng& rng) {
  ActionSample a;
  const int ki = pick(dists.kind_logp, greedy, rng);
  a.kind = ctrl.kinds[static_cast<std::size_t>(ki)];
  a.logp = dists.kind_logp[static_cast<std::size_t>(ki)];
  if (a.kind == ActionKind::Reduce) {
    a.module = pick(dists.red_logp, greedy, rng);
    a.logp += dists.red_logp[static_cast<std::size_t>(a.module)];
    if (!dists.candidates.empty()) {
      const int wi = pick(dists.win_logp, greedy, rng);
      a.window = dists.candidates[static_cast<std::size_t>(wi)];
      a.logp += dists.win_logp[static_cast<std::size_t>(wi)];
    }
  } else if (a.kind == ActionKind::Translate) {
    a.module = pick(dists.tr_logp, greedy, rng);
    a.logp += dists.tr_logp[static_cast<std::size_t>(a.module)];
  } else {
    a.module = -1;
  }
  a.entropy = dists_entropy(ctrl, dists);
  a.value = dists.value;
  return a;
}

// --- tape path ---------------------------------------------------------------

namespace {

struct TapeEncode {
  std::vector<int> features;
  int summary = -1;
};

TapeEncode encode_tape(Tape& tape, const TapeParams& tp, const ControllerParams& ctrl,
                       const GruParamIds& gru, const Tensor& state, const Tensor& target) {
  TapeEncode out;
  const int target_node =
      ctrl.cfg.target_dim > 0 ? tape.leaf(target) : -1;
  int h = tape.leaf(Tensor(1, ctrl.cfg.hidden));
  for (int i = 0; i < state.rows; ++i) {
    int x = tape.leaf(row_of(state, i));
    if (target_node >= 0) x = tape.concat(std::array{x, target_node});
    h = gru_cell(tape, tp, gru, x, h);
    out.features.push_back(h);
  }
  out.summary = h;
  return out;
}

// -sum(p . logp) over a 1 x n log-prob node.
int entropy_node(Tape& tape, int logp_node) {
  const int n = tape.value(logp_node).cols;
  const int p = tape.apply(Op::RowSoftmax, std::array{logp_node});
  const int plogp = tape.mul(p, logp_node);
  const int ones = tape.leaf(Tensor(n, 1, std::vector<double>(static_cast<std::size_t>(n), 1.0)));
  return tape.scale(tape.matmul(plogp, ones), -1.0);
}

int select_scalar(Tape& tape, int row_node, int index) {
  const int n = tape.value(row_node).cols;
  Tensor onehot(n, 1);
  onehot.at(index, 0) = 1.0;
  return tape.matmul(row_node, tape.leaf(std::move(onehot)));
}

}  // namespace

ControllerEvalNodes controller_eval_tape(Tape& tape, const TapeParams& tp,
                                         const ControllerParams& ctrl,
                                         const Tensor& state, const Tensor& target,
                                         const ActionSample& action) {
  const TapeEncode enc = encode_tape(tape, tp, ctrl, ctrl.enc, state, target);
  const int kind_lp =
      tape.row_log_softmax(tape.affine(enc.summary, tp[ctrl.w_kind], tp[ctrl.b_kind]));
  const int red_lp =
      tape.row_log_softmax(tape.affine(enc.summary, tp[ctrl.w_red], tp[ctrl.b_red]));
  const int tr_lp = ctrl.cfg.translators > 0
                        ? tape.row_log_softmax(
                              tape.affine(enc.summary, tp[ctrl.w_tr], tp[ctrl.b_tr]))
                        : -1;
  const std::vector<int> candidates = window_candidates(state, ctrl.cfg.operator_windows);
  int win_lp = -1;
  if (!candidates.empty()) {
    std::vector<int> scores;
    scores.reserve(candidates.size());
    for (const int w : candidates) {
      const int win = tape.concat(std::array{enc.features[static_cast<std::size_t>(w)],
                                             enc.features[static_cast<std::size_t>(w + 1)],
                                             enc.features[static_cast<std::size_t>(w + 2)]});
      scores.push_back(tape.affine(win, tp[ctrl.w_win], tp[ctrl.b_win]));
    }
    win_lp = tape.row_log_softmax(tape.concat(scores));
  }

  // Joint log-prob of the stored action.
  int logp = select_scalar(tape, kind_lp, ctrl.kind_index(action.kind));
  if (action.kind == ActionKind::Reduce) {
    logp = tape.add(logp, select_scalar(tape, red_lp, action.module));
    if (action.window >= 0) {
      int wi = -1;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i] == action.window) wi = static_cast<int>(i);
      }
      if (wi < 0) fail("internal", "stored window not among candidates");
      logp = tape.add(logp, select_scalar(tape, win_lp, wi));
    }
  } else if (action.kind == ActionKind::Translate) {
    logp = tape.add(logp, select_scalar(tape, tr_lp, action.module));
  }

  // Joint entropy: H(kind) + p(reduce) (H(red) + H(win)) + p(translate) H(tr).
  const int kind_p = tape.apply(Op::RowSoftmax, std::array{kind_lp});
  int entropy = entropy_node(tape, kind_lp);
  {
    int h_red = entropy_node(tape, red_lp);
    if (win_lp >= 0) h_red = tape.add(h_red, entropy_node(tape, win_lp));
    const int p_red = select_scalar(tape, kind_p, ctrl.kind_index(ActionKind::Reduce));
    entropy = tape.add(entropy, tape.mul(p_red, h_red));
  }
  if (tr_lp >= 0) {
    const int p_tr = select_scalar(tape, kind_p, ctrl.kind_index(ActionKind::Translate));
    entropy = tape.add(entropy, tape.mul(p_tr, entropy_node(tape, tr_lp)));
  }

  const int value_summary =
      ctrl.cfg.shared_encoder
          ? enc.summary
          : encode_tape(tape, tp, ctrl, ctrl.value_enc, state, target).summary;
  const int value = tape.affine(value_summary, tp[ctrl.w_val], tp[ctrl.b_val]);

  return ControllerEvalNodes{logp, entropy, value};
}

ActionSample hardcoded_controller_action(const Tensor& state) {
  ActionSample a;
  a.module = 0;
  const std::vector<int> ids = argmax_tokens(state);
  const Vocab vocab{state.cols > Vocab::kBlock ? 5 : 1};
  if (ids.size() == 1) {
    a.kind = ActionKind::Halt;
    a.module = -1;
    return a;
  }
  auto window_at = [&](int w) {
    return vocab.is_digit(ids[static_cast<std::size_t>(w)]) &&
           vocab.is_operator(ids[static_cast<std::size_t>(w + 1)]) &&
           vocab.is_digit(ids[static_cast<std::size_t>(w + 2)]);
  };
  int fallback = -1;
  for (int w = 0; w + 2 < static_cast<int>(ids.size()); ++w) {
    if (!window_at(w)) continue;
    if (vocab.local_of(ids[static_cast<std::size_t>(w + 1)]) == Vocab::kTimesLocal) {
      a.kind = ActionKind::Reduce;
      a.window = w;
      return a;
    }
    if (fallback < 0) fallback = w;
  }
  if (fallback >= 0) {
    a.kind = ActionKind::Reduce;
    a.window = fallback;
    return a;
  }
  a.kind = ActionKind::Halt;  // malformed state
  a.module = -1;
  return a;
}

}  // namespace crl
