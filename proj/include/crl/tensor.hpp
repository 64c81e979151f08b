#pragma once

#include <string>
#include <vector>

#include "crl/rng.hpp"

namespace crl {

// Dense row-major matrix of doubles. Everything in the learner is rank 2:
// vectors are 1 x n, scalars 1 x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0);
  Tensor(int r, int c, std::vector<double> values);

  int size() const { return rows * cols; }
  bool empty() const { return data.empty(); }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  double* row_ptr(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row_ptr(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  std::string shape_str() const;
};

Tensor row_of(const Tensor& t, int r);
int argmax_row(const Tensor& t, int r);

// Argmax token id per row.
std::vector<int> argmax_tokens(const Tensor& seq);

enum class InitScheme { UniformXavier, Zeros };

// Xavier bound sqrt(6 / (fan_in + fan_out)); draws reproducible from rng.
Tensor init_params(int rows, int cols, InitScheme scheme, SeededRng& rng);

// Max |a - b| over all elements; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace crl
