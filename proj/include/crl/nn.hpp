#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crl/tape.hpp"
#include "crl/tensor.hpp"

namespace crl {

// Named parameter registry. Ids are stable within a run and index both the
// Adam state and the node map when parameters are pushed onto a tape.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor> values;

  int add(const std::string& name, Tensor t) {
    names.push_back(name);
    values.push_back(std::move(t));
    return static_cast<int>(values.size()) - 1;
  }

  int find(const std::string& name) const;
  int count() const { return static_cast<int>(values.size()); }
  const Tensor& operator[](int id) const { return values[static_cast<std::size_t>(id)]; }
  Tensor& operator[](int id) { return values[static_cast<std::size_t>(id)]; }
};

// Node ids of every parameter pushed onto a tape, aligned with param ids.
struct TapeParams {
  std::vector<int> node;
  int operator[](int param_id) const { return node[static_cast<std::size_t>(param_id)]; }
};

TapeParams push_params(Tape& tape, const ParamSet& params);

// Bias-corrected Adam over a ParamSet. Moments are lazily shaped on first use.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<Tensor> m, v;
};

// Applies one update in place. Empty grad slots are treated as zero.
void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state);

// --- gated recurrent unit -------------------------------------------------

// z = sigma(x Wz + h Uz + bz), r = sigma(x Wr + h Ur + br),
// cand = tanh(x Wh + (r . h) Uh + bh), h' = h + z . (cand - h)
struct GruParamIds {
  int wz, uz, bz, wr, ur, br, wh, uh, bh;
};

GruParamIds add_gru_params(ParamSet& params, const std::string& prefix, int in_dim,
                           int hidden, SeededRng& rng);

// Tape path: returns the node of h'.
int gru_cell(Tape& tape, const TapeParams& tp, const GruParamIds& g, int x_node,
             int h_node);

// Plain path, identical arithmetic order to the tape path.
Tensor gru_cell_plain(const ParamSet& params, const GruParamIds& g, const Tensor& x,
                      const Tensor& h);

// --- plain forward helpers (rollout hot path) -------------------------------

Tensor affine_plain(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor matmul_plain(const Tensor& a, const Tensor& b);
void softmax_row_inplace(Tensor& t);
void log_softmax_row_inplace(Tensor& t);
Tensor concat_cols(const std::vector<const Tensor*>& xs);

// --- checkpoint io ----------------------------------------------------------

// Plain-text format, one value row per tensor row at 17 significant digits;
// round-trips bit-exactly.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  ParamSet params;

  const std::string* meta_value(const std::string& key) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string format_g17(double v);

}  // namespace crl
