#pragma once

// Central finite-difference oracle for reverse-mode gradients. Rebuilds the
// graph at x +/- h per input element and compares against backward().

#include <cmath>
#include <functional>
#include <vector>

#include "crl/tape.hpp"

namespace crl::testing {

using GraphBuilder = std::function<int(Tape&, const std::vector<int>&)>;

inline double loss_value(const GraphBuilder& build, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<int> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  return tape.scalar(build(tape, leaves));
}

// Max relative error across every element of every input.
inline double fd_max_rel_err(const GraphBuilder& build, std::vector<Tensor> inputs,
                             double h = 1e-5) {
  Tape tape;
  std::vector<int> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  const int loss = build(tape, leaves);
  const std::vector<Tensor> grads = tape.backward(loss);

  double worst = 0.0;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    for (int i = 0; i < inputs[which].size(); ++i) {
      const double keep = inputs[which].data[static_cast<std::size_t>(i)];
      inputs[which].data[static_cast<std::size_t>(i)] = keep + h;
      const double up = loss_value(build, inputs);
      inputs[which].data[static_cast<std::size_t>(i)] = keep - h;
      const double down = loss_value(build, inputs);
      inputs[which].data[static_cast<std::size_t>(i)] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const Tensor& g = grads[leaves[which]];
      const double analytic = g.empty() ? 0.0 : g.data[static_cast<std::size_t>(i)];
      const double err =
          std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Scalar readout: ones_row (out . weights) ones_col, weights fixed.
inline int weighted_sum(Tape& tape, int out, const Tensor& weights) {
  const Tensor& v = tape.value(out);
  const int w = tape.leaf(weights);
  const int prod = tape.mul(out, w);
  const int ones_row = tape.leaf(Tensor(1, v.rows, std::vector<double>(static_cast<std::size_t>(v.rows), 1.0)));
  const int ones_col = tape.leaf(Tensor(v.cols, 1, std::vector<double>(static_cast<std::size_t>(v.cols), 1.0)));
  return tape.matmul(tape.matmul(ones_row, prod), ones_col);
}

inline Tensor random_tensor(int rows, int cols, SeededRng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace crl::testing
