#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "crl/tensor.hpp"

namespace crl {

// Primitive kinds recorded on the tape. Scale carries a constant factor in
// the node payload; Nll treats its second input (the target distribution)
// as a constant.
enum class Op : std::uint8_t {
  Leaf,
  Matmul,
  Add,          // same shape, or second input 1 x n row-broadcast
  Mul,          // elementwise, same shape
  Concat,       // along columns, same row count
  Relu,
  Tanh,
  Logistic,
  RowSoftmax,
  RowLogSoftmax,
  Nll,          // -(sum target * log probs), scalar output
  Scale,
};

// One computation graph, rebuilt per forward pass. Nodes are appended in
// topological order by construction; backward() runs a single reverse sweep
// from a scalar loss node.
class Tape {
 public:
  int leaf(Tensor value, int param_id = -1);

  // Generic primitive application; validates shapes, records the node,
  // rejects non-finite outputs.
  int apply(Op op, std::span<const int> inputs, double c = 0.0);

  int matmul(int a, int b) { return apply(Op::Matmul, std::array{a, b}); }
  int add(int a, int b) { return apply(Op::Add, std::array{a, b}); }
  int mul(int a, int b) { return apply(Op::Mul, std::array{a, b}); }
  int concat(std::span<const int> xs) { return apply(Op::Concat, xs); }
  int relu(int x) { return apply(Op::Relu, std::array{x}); }
  int tanh(int x) { return apply(Op::Tanh, std::array{x}); }
  int logistic(int x) { return apply(Op::Logistic, std::array{x}); }
  int row_softmax(int x) { return apply(Op::RowSoftmax, std::array{x}); }
  int row_log_softmax(int x) { return apply(Op::RowLogSoftmax, std::array{x}); }
  int nll(int probs, int target) { return apply(Op::Nll, std::array{probs, target}); }
  int scale(int x, double c) { return apply(Op::Scale, std::array{x}, c); }

  // x W + b with b a 1 x n bias row.
  int affine(int x, int w, int b) { return add(matmul(x, w), b); }

  const Tensor& value(int node) const { return nodes_[static_cast<std::size_t>(node)].value; }
  double scalar(int node) const;
  int param_of(int node) const { return nodes_[static_cast<std::size_t>(node)].param_id; }
  int size() const { return static_cast<int>(nodes_.size()); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  // Gradients for every node reachable from the scalar loss; unreached nodes
  // keep an empty tensor. Rejects non-scalar loss nodes.
  std::vector<Tensor> backward(int loss_node) const;

  // Gradients aligned with param ids 0..param_count-1 (empty tensor where a
  // parameter leaf was never pushed or not reached).
  std::vector<Tensor> param_grads(int loss_node, int param_count) const;

 private:
  struct Node {
    Op op = Op::Leaf;
    double c = 0.0;
    std::vector<int> inputs;
    Tensor value;
    int param_id = -1;
  };

  Tensor eval(Op op, std::span<const int> inputs, double c) const;

  std::vector<Node> nodes_;
};

}  // namespace crl
