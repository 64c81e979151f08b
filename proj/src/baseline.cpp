#include "crl/baseline.hpp"

#include "crl/error.hpp"
#include "crl/expression.hpp"

namespace crl {

BaselineParams init_baseline(const BaselineConfig& cfg, SeededRng& rng) {
  BaselineParams net;
  net.cfg = cfg;
  SeededRng stream = SeededRng::stream(rng.next_u64(), "baseline-init");
  net.enc = add_gru_params(net.params, "baseline.enc", net.input_width(), cfg.hidden, stream);
  net.w_out = net.params.add("baseline.out.w",
                             init_params(cfg.hidden, net.output_width(), InitScheme::UniformXavier, stream));
  net.b_out = net.params.add("baseline.out.b",
                             init_params(1, net.output_width(), InitScheme::Zeros, stream));
  return net;
}

Tensor baseline_input(const ProblemInstance& problem, const Vocab& vocab) {
  if (!vocab.multilingual()) {
    return encode_onehot(problem.input_ids, vocab.width());
  }
  // [target marker] tokens... [STOP]; marker lives in the 5 extra dims.
  const int width = vocab.width() + vocab.languages;
  Tensor input(static_cast<int>(problem.input_ids.size()) + 2, width);
  input.at(0, vocab.width() + problem.tgt) = 1.0;
  for (std::size_t i = 0; i < problem.input_ids.size(); ++i) {
    input.at(static_cast<int>(i) + 1, problem.input_ids[i]) = 1.0;
  }
  input.at(input.rows - 1, Vocab::kStopId) = 1.0;
  return input;
}

Tensor baseline_forward(const BaselineParams& net, const Tensor& input) {
  Tensor h(1, net.cfg.hidden);
  for (int i = 0; i < input.rows; ++i) {
    h = gru_cell_plain(net.params, net.enc, row_of(input, i), h);
  }
  Tensor logits = affine_plain(h, net.params[net.w_out], net.params[net.b_out]);
  softmax_row_inplace(logits);
  return logits;
}

void baseline_update(BaselineParams& net, AdamState& adam,
                     const std::vector<const ProblemInstance*>& batch, const Vocab& vocab) {
  if (batch.empty()) return;
  Tape tape;
  const TapeParams tp = push_params(tape, net.params);
  int loss = -1;
  for (const ProblemInstance* problem : batch) {
    const Tensor input = baseline_input(*problem, vocab);
    int h = tape.leaf(Tensor(1, net.cfg.hidden));
    for (int i = 0; i < input.rows; ++i) {
      h = gru_cell(tape, tp, net.enc, tape.leaf(row_of(input, i)), h);
    }
    const int probs = tape.row_softmax(tape.affine(h, tp[net.w_out], tp[net.b_out]));
    Tensor onehot(1, net.output_width());
    onehot.at(0, problem->answer_id) = 1.0;
    const int nll = tape.nll(probs, tape.leaf(std::move(onehot)));
    const int scaled = tape.scale(nll, 1.0 / static_cast<double>(batch.size()));
    loss = loss < 0 ? scaled : tape.add(loss, scaled);
  }
  const std::vector<Tensor> grads = tape.param_grads(loss, net.params.count());
  adam_step(net.params, grads, adam);
}

}  // namespace crl
