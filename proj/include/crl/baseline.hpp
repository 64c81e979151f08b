#pragma once

#include "crl/dataset.hpp"
#include "crl/nn.hpp"
#include "crl/rng.hpp"
#include "crl/tape.hpp"

namespace crl {

// Sequence-to-sequence GRU trained to map the expression directly to its
// answer token. Multilingual inputs prepend a target-language marker row and
// append STOP; the answer distribution spans the full vocabulary.
struct BaselineConfig {
  int languages = 1;
  int hidden = 64;
};

struct BaselineParams {
  BaselineConfig cfg;
  ParamSet params;
  GruParamIds enc{};
  int w_out = -1, b_out = -1;

  int input_width() const {
    const Vocab v{cfg.languages};
    return v.multilingual() ? v.width() + cfg.languages : v.width();
  }
  int output_width() const { return Vocab{cfg.languages}.width(); }
};

BaselineParams init_baseline(const BaselineConfig& cfg, SeededRng& rng);

Tensor baseline_input(const ProblemInstance& problem, const Vocab& vocab);

// Answer distribution (1 x V), plain path.
Tensor baseline_forward(const BaselineParams& net, const Tensor& input);

// Mean NLL over a batch, one Adam step.
void baseline_update(BaselineParams& net, AdamState& adam,
                     const std::vector<const ProblemInstance*>& batch, const Vocab& vocab);

}  // namespace crl
