#pragma once

#include <string>
#include <vector>

#include "crl/nn.hpp"
#include "crl/rng.hpp"
#include "crl/tape.hpp"
#include "crl/tensor.hpp"
#include "crl/vocab.hpp"

namespace crl {

// Two-layer feedforward reducer: 3 token rows in, 1 row out,
// row_softmax(relu(concat(window) W1 + b1) W2 + b2). A hardcoded reducer
// evaluates the window exactly instead (no parameters).
struct ReducerParams {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
  bool hardcoded = false;
};

// Single linear map applied identically at every position:
// per row, row_softmax(x W).
struct TranslatorParams {
  int w = -1;
};

struct ModuleConfig {
  int vocab_width = 13;
  int reducers = 1;
  int translators = 0;
  int hidden = 128;
  bool hardcoded_reducers = false;
};

// The module collection M. Module inputs never carry the target language;
// modules stay task-agnostic by interface.
struct ModuleSet {
  ModuleConfig cfg;
  ParamSet params;
  std::vector<ReducerParams> reducers;
  std::vector<TranslatorParams> translators;

  bool learned() const { return params.count() > 0; }
};

ModuleSet init_module_set(const ModuleConfig& cfg, SeededRng& rng);

// Exact mod-10 evaluation of a (digit, operator, digit) window decoded by
// argmax in the numerals block. Returns false for a malformed window
// (callers treat that as a no-op).
bool hardcoded_reduce(const Tensor& window, Tensor* out);

// Plain path. window is 3 x V, result 1 x V in the simplex.
Tensor reducer_apply(const ModuleSet& mods, int reducer, const Tensor& window);
// seq is L x V; length preserved.
Tensor translator_apply(const ModuleSet& mods, int translator, const Tensor& seq);

// Tape path over per-row nodes (each 1 x V).
int reducer_apply_tape(Tape& tape, const TapeParams& tp, const ModuleSet& mods,
                       int reducer, int r0, int r1, int r2);
int translator_row_tape(Tape& tape, const TapeParams& tp, const ModuleSet& mods,
                        int translator, int row);

}  // namespace crl
