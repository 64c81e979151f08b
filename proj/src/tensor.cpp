#include "crl/tensor.hpp"

#include <cmath>

#include "crl/error.hpp"

namespace crl {

Tensor::Tensor(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
  if (r < 0 || c < 0) fail("internal", "negative tensor extent");
}

Tensor::Tensor(int r, int c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (static_cast<std::size_t>(r) * c != data.size()) {
    fail("internal", "tensor data length does not match shape " + shape_str());
  }
}

bool Tensor::all_finite() const {
  for (const double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

Tensor row_of(const Tensor& t, int r) {
  Tensor out(1, t.cols);
  for (int c = 0; c < t.cols; ++c) out.at(0, c) = t.at(r, c);
  return out;
}

int argmax_row(const Tensor& t, int r) {
  int best = 0;
  for (int c = 1; c < t.cols; ++c) {
    if (t.at(r, c) > t.at(r, best)) best = c;
  }
  return best;
}

std::vector<int> argmax_tokens(const Tensor& seq) {
  std::vector<int> out(static_cast<std::size_t>(seq.rows));
  for (int r = 0; r < seq.rows; ++r) out[static_cast<std::size_t>(r)] = argmax_row(seq, r);
  return out;
}

Tensor init_params(int rows, int cols, InitScheme scheme, SeededRng& rng) {
  Tensor out(rows, cols);
  if (scheme == InitScheme::Zeros) return out;
  const double bound = std::sqrt(6.0 / (rows + cols));
  for (double& v : out.data) v = rng.uniform(-bound, bound);
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) fail("internal", "max_abs_diff shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data[static_cast<std::size_t>(i)] - b.data[static_cast<std::size_t>(i)]));
  }
  return m;
}

}  // namespace crl
