#include "crl/modules.hpp"

#include "crl/error.hpp"
#include "crl/expression.hpp"

namespace crl {

ModuleSet init_module_set(const ModuleConfig& cfg, SeededRng& rng) {
  if (cfg.reducers < 1) fail("config", "module set needs at least one reducer");
  if (cfg.translators < 0) fail("config", "negative translator count");
  ModuleSet mods;
  mods.cfg = cfg;
  const int v = cfg.vocab_width;
  for (int i = 0; i < cfg.reducers; ++i) {
    ReducerParams r;
    r.hardcoded = cfg.hardcoded_reducers;
    if (!r.hardcoded) {
      const std::string prefix = "reducer." + std::to_string(i);
      SeededRng stream = SeededRng::stream(rng.next_u64(), "reducer-init", static_cast<std::uint64_t>(i));
      r.w1 = mods.params.add(prefix + ".w1", init_params(3 * v, cfg.hidden, InitScheme::UniformXavier, stream));
      r.b1 = mods.params.add(prefix + ".b1", init_params(1, cfg.hidden, InitScheme::Zeros, stream));
      r.w2 = mods.params.add(prefix + ".w2", init_params(cfg.hidden, v, InitScheme::UniformXavier, stream));
      r.b2 = mods.params.add(prefix + ".b2", init_params(1, v, InitScheme::Zeros, stream));
    }
    mods.reducers.push_back(r);
  }
  for (int j = 0; j < cfg.translators; ++j) {
    TranslatorParams t;
    SeededRng stream = SeededRng::stream(rng.next_u64(), "translator-init", static_cast<std::uint64_t>(j));
    t.w = mods.params.add("translator." + std::to_string(j) + ".w",
                          init_params(v, v, InitScheme::UniformXavier, stream));
    mods.translators.push_back(t);
  }
  return mods;
}

bool hardcoded_reduce(const Tensor& window, Tensor* out) {
  if (window.rows != 3) fail("shape", "reducer window must have 3 rows");
  const int a = argmax_row(window, 0);
  const int op = argmax_row(window, 1);
  const int b = argmax_row(window, 2);
  if (a > 9 || b > 9 || op < Vocab::kPlusLocal || op > Vocab::kMinusLocal) {
    return false;
  }
  const int value = eval_binary_mod10(a, static_cast<OpSym>(op - Vocab::kPlusLocal), b);
  Tensor result(1, window.cols);
  result.at(0, value) = 1.0;
  *out = std::move(result);
  return true;
}

Tensor reducer_apply(const ModuleSet& mods, int reducer, const Tensor& window) {
  if (reducer < 0 || reducer >= static_cast<int>(mods.reducers.size())) {
    fail("internal", "reducer id out of range: " + std::to_string(reducer));
  }
  if (window.rows != 3 || window.cols != mods.cfg.vocab_width) {
    fail("shape", "reducer window " + window.shape_str() + " vs vocab width " +
                      std::to_string(mods.cfg.vocab_width));
  }
  const ReducerParams& r = mods.reducers[static_cast<std::size_t>(reducer)];
  if (r.hardcoded) {
    Tensor out;
    if (!hardcoded_reduce(window, &out)) {
      fail("internal", "hardcoded reducer on malformed window (caller must no-op)");
    }
    return out;
  }
  const Tensor w0 = row_of(window, 0);
  const Tensor w1 = row_of(window, 1);
  const Tensor w2 = row_of(window, 2);
  const Tensor flat = concat_cols({&w0, &w1, &w2});
  Tensor hidden = affine_plain(flat, mods.params[r.w1], mods.params[r.b1]);
  for (double& v : hidden.data) v = v > 0.0 ? v : 0.0;
  Tensor logits = affine_plain(hidden, mods.params[r.w2], mods.params[r.b2]);
  softmax_row_inplace(logits);
  return logits;
}

Tensor translator_apply(const ModuleSet& mods, int translator, const Tensor& seq) {
  if (translator < 0 || translator >= static_cast<int>(mods.translators.size())) {
    fail("internal", "translator id out of range: " + std::to_string(translator));
  }
  if (seq.cols != mods.cfg.vocab_width) {
    fail("shape", "translator input " + seq.shape_str() + " vs vocab width " +
                      std::to_string(mods.cfg.vocab_width));
  }
  const TranslatorParams& t = mods.translators[static_cast<std::size_t>(translator)];
  Tensor out = matmul_plain(seq, mods.params[t.w]);
  softmax_row_inplace(out);
  return out;
}

int reducer_apply_tape(Tape& tape, const TapeParams& tp, const ModuleSet& mods,
                       int reducer, int r0, int r1, int r2) {
  const ReducerParams& r = mods.reducers[static_cast<std::size_t>(reducer)];
  if (r.hardcoded) {
    // No parameters; the exact output enters the graph as a constant.
    Tensor window(3, tape.value(r0).cols);
    for (int c = 0; c < window.cols; ++c) {
      window.at(0, c) = tape.value(r0).at(0, c);
      window.at(1, c) = tape.value(r1).at(0, c);
      window.at(2, c) = tape.value(r2).at(0, c);
    }
    Tensor out;
    if (!hardcoded_reduce(window, &out)) {
      fail("internal", "hardcoded reducer on malformed window (caller must no-op)");
    }
    return tape.leaf(std::move(out));
  }
  const int flat = tape.concat(std::array{r0, r1, r2});
  const int hidden = tape.relu(tape.affine(flat, tp[r.w1], tp[r.b1]));
  return tape.row_softmax(tape.affine(hidden, tp[r.w2], tp[r.b2]));
}

int translator_row_tape(Tape& tape, const TapeParams& tp, const ModuleSet& mods,
                        int translator, int row) {
  const TranslatorParams& t = mods.translators[static_cast<std::size_t>(translator)];
  return tape.row_softmax(tape.matmul(row, tp[t.w]));
}

}  // namespace crl
