#include "crl/tape.hpp"

#include <cmath>

#include "crl/error.hpp"

namespace crl {

namespace {

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out, bool transpose_a,
                 bool transpose_b) {
  const int m = transpose_a ? a.cols : a.rows;
  const int k = transpose_a ? a.rows : a.cols;
  const int n = transpose_b ? b.rows : b.cols;
  for (int i = 0; i < m; ++i) {
    double* out_row = out.row_ptr(i);
    for (int kk = 0; kk < k; ++kk) {
      const double av = transpose_a ? a.at(kk, i) : a.at(i, kk);
      if (av == 0.0) continue;
      if (!transpose_b) {
        const double* b_row = b.row_ptr(kk);
        for (int j = 0; j < n; ++j) out_row[j] += av * b_row[j];
      } else {
        for (int j = 0; j < n; ++j) out_row[j] += av * b.at(j, kk);
      }
    }
  }
}

}  // namespace

int Tape::leaf(Tensor value, int param_id) {
  Node node;
  node.op = Op::Leaf;
  node.value = std::move(value);
  node.param_id = param_id;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

double Tape::scalar(int node) const {
  const Tensor& v = value(node);
  if (v.size() != 1) fail("internal", "expected scalar node, got " + v.shape_str());
  return v.data[0];
}

int Tape::apply(Op op, std::span<const int> inputs, double c) {
  Node node;
  node.op = op;
  node.c = c;
  node.inputs.assign(inputs.begin(), inputs.end());
  node.value = eval(op, inputs, c);
  if (!node.value.all_finite()) {
    fail("non-finite", "primitive produced a non-finite value");
  }
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::eval(Op op, std::span<const int> inputs, double c) const {
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n) fail("shape", "primitive arity mismatch");
  };
  switch (op) {
    case Op::Leaf:
      fail("internal", "leaf is not applied");
    case Op::Matmul: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      if (a.cols != b.rows) {
        fail("shape", "matmul mismatch " + a.shape_str() + " * " + b.shape_str());
      }
      Tensor out(a.rows, b.cols);
      matmul_into(a, b, out, false, false);
      return out;
    }
    case Op::Add: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      if (a.same_shape(b)) {
        Tensor out = a;
        for (int i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] += b.data[static_cast<std::size_t>(i)];
        return out;
      }
      if (b.rows == 1 && b.cols == a.cols) {
        Tensor out = a;
        for (int r = 0; r < a.rows; ++r) {
          double* row = out.row_ptr(r);
          for (int j = 0; j < a.cols; ++j) row[j] += b.data[static_cast<std::size_t>(j)];
        }
        return out;
      }
      fail("shape", "add mismatch " + a.shape_str() + " + " + b.shape_str());
    }
    case Op::Mul: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      if (!a.same_shape(b)) fail("shape", "mul mismatch " + a.shape_str() + " * " + b.shape_str());
      Tensor out = a;
      for (int i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] *= b.data[static_cast<std::size_t>(i)];
      return out;
    }
    case Op::Concat: {
      if (inputs.empty()) fail("shape", "concat of nothing");
      const int rows = value(inputs[0]).rows;
      int cols = 0;
      for (const int in : inputs) {
        if (value(in).rows != rows) fail("shape", "concat row mismatch");
        cols += value(in).cols;
      }
      Tensor out(rows, cols);
      int at = 0;
      for (const int in : inputs) {
        const Tensor& t = value(in);
        for (int r = 0; r < rows; ++r) {
          for (int j = 0; j < t.cols; ++j) out.at(r, at + j) = t.at(r, j);
        }
        at += t.cols;
      }
      return out;
    }
    case Op::Relu: {
      arity(1);
      Tensor out = value(inputs[0]);
      for (double& v : out.data) v = v > 0.0 ? v : 0.0;
      return out;
    }
    case Op::Tanh: {
      arity(1);
      Tensor out = value(inputs[0]);
      for (double& v : out.data) v = std::tanh(v);
      return out;
    }
    case Op::Logistic: {
      arity(1);
      Tensor out = value(inputs[0]);
      for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
      return out;
    }
    case Op::RowSoftmax:
    case Op::RowLogSoftmax: {
      arity(1);
      Tensor out = value(inputs[0]);
      for (int r = 0; r < out.rows; ++r) {
        double* row = out.row_ptr(r);
        double mx = row[0];
        for (int j = 1; j < out.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < out.cols; ++j) sum += std::exp(row[j] - mx);
        if (op == Op::RowSoftmax) {
          for (int j = 0; j < out.cols; ++j) row[j] = std::exp(row[j] - mx) / sum;
        } else {
          const double lse = mx + std::log(sum);
          for (int j = 0; j < out.cols; ++j) row[j] -= lse;
        }
      }
      return out;
    }
    case Op::Nll: {
      arity(2);
      const Tensor& p = value(inputs[0]);
      const Tensor& t = value(inputs[1]);
      if (!p.same_shape(t)) fail("shape", "nll mismatch " + p.shape_str() + " vs " + t.shape_str());
      double loss = 0.0;
      for (int i = 0; i < p.size(); ++i) {
        const double ti = t.data[static_cast<std::size_t>(i)];
        if (ti != 0.0) loss -= ti * std::log(p.data[static_cast<std::size_t>(i)]);
      }
      return Tensor(1, 1, {loss});
    }
    case Op::Scale: {
      arity(1);
      Tensor out = value(inputs[0]);
      for (double& v : out.data) v *= c;
      return out;
    }
  }
  fail("internal", "unknown primitive");
}

std::vector<Tensor> Tape::backward(int loss_node) const {
  const Tensor& loss = value(loss_node);
  if (loss.size() != 1) {
    fail("shape", "backward requires a scalar loss, got " + loss.shape_str());
  }
  std::vector<Tensor> grads(nodes_.size());
  auto grad_of = [&](int id) -> Tensor& {
    Tensor& g = grads[static_cast<std::size_t>(id)];
    if (g.empty()) g = Tensor(value(id).rows, value(id).cols);
    return g;
  };
  grad_of(loss_node).data[0] = 1.0;

  for (int id = loss_node; id >= 0; --id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = grads[static_cast<std::size_t>(id)];
    if (g.empty() || node.op == Op::Leaf) continue;
    switch (node.op) {
      case Op::Leaf:
        break;
      case Op::Matmul: {
        const Tensor& a = value(node.inputs[0]);
        const Tensor& b = value(node.inputs[1]);
        matmul_into(g, b, grad_of(node.inputs[0]), false, true);   // dA = G B^T
        matmul_into(a, g, grad_of(node.inputs[1]), true, false);   // dB = A^T G
        break;
      }
      case Op::Add: {
        const Tensor& a = value(node.inputs[0]);
        const Tensor& b = value(node.inputs[1]);
        Tensor& ga = grad_of(node.inputs[0]);
        for (int i = 0; i < a.size(); ++i) ga.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)];
        Tensor& gb = grad_of(node.inputs[1]);
        if (a.same_shape(b)) {
          for (int i = 0; i < b.size(); ++i) gb.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)];
        } else {
          for (int r = 0; r < a.rows; ++r) {
            const double* grow = g.row_ptr(r);
            for (int j = 0; j < a.cols; ++j) gb.data[static_cast<std::size_t>(j)] += grow[j];
          }
        }
        break;
      }
      case Op::Mul: {
        const Tensor& a = value(node.inputs[0]);
        const Tensor& b = value(node.inputs[1]);
        Tensor& ga = grad_of(node.inputs[0]);
        Tensor& gb = grad_of(node.inputs[1]);
        for (int i = 0; i < a.size(); ++i) {
          ga.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)] * b.data[static_cast<std::size_t>(i)];
          gb.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)] * a.data[static_cast<std::size_t>(i)];
        }
        break;
      }
      case Op::Concat: {
        int at = 0;
        for (const int in : node.inputs) {
          const Tensor& t = value(in);
          Tensor& gi = grad_of(in);
          for (int r = 0; r < t.rows; ++r) {
            for (int j = 0; j < t.cols; ++j) gi.at(r, j) += g.at(r, at + j);
          }
          at += t.cols;
        }
        break;
      }
      case Op::Relu: {
        const Tensor& x = value(node.inputs[0]);
        Tensor& gx = grad_of(node.inputs[0]);
        for (int i = 0; i < x.size(); ++i) {
          if (x.data[static_cast<std::size_t>(i)] > 0.0) gx.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)];
        }
        break;
      }
      case Op::Tanh: {
        const Tensor& y = node.value;
        Tensor& gx = grad_of(node.inputs[0]);
        for (int i = 0; i < y.size(); ++i) {
          const double yv = y.data[static_cast<std::size_t>(i)];
          gx.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)] * (1.0 - yv * yv);
        }
        break;
      }
      case Op::Logistic: {
        const Tensor& y = node.value;
        Tensor& gx = grad_of(node.inputs[0]);
        for (int i = 0; i < y.size(); ++i) {
          const double yv = y.data[static_cast<std::size_t>(i)];
          gx.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)] * yv * (1.0 - yv);
        }
        break;
      }
      case Op::RowSoftmax: {
        const Tensor& p = node.value;
        Tensor& gx = grad_of(node.inputs[0]);
        for (int r = 0; r < p.rows; ++r) {
          const double* prow = p.row_ptr(r);
          const double* grow = g.row_ptr(r);
          double dot = 0.0;
          for (int j = 0; j < p.cols; ++j) dot += grow[j] * prow[j];
          double* gxrow = gx.row_ptr(r);
          for (int j = 0; j < p.cols; ++j) gxrow[j] += prow[j] * (grow[j] - dot);
        }
        break;
      }
      case Op::RowLogSoftmax: {
        const Tensor& lp = node.value;
        Tensor& gx = grad_of(node.inputs[0]);
        for (int r = 0; r < lp.rows; ++r) {
          const double* lprow = lp.row_ptr(r);
          const double* grow = g.row_ptr(r);
          double gsum = 0.0;
          for (int j = 0; j < lp.cols; ++j) gsum += grow[j];
          double* gxrow = gx.row_ptr(r);
          for (int j = 0; j < lp.cols; ++j) gxrow[j] += grow[j] - std::exp(lprow[j]) * gsum;
        }
        break;
      }
      case Op::Nll: {
        const Tensor& p = value(node.inputs[0]);
        const Tensor& t = value(node.inputs[1]);
        Tensor& gp = grad_of(node.inputs[0]);
        const double gs = g.data[0];
        for (int i = 0; i < p.size(); ++i) {
          const double ti = t.data[static_cast<std::size_t>(i)];
          if (ti != 0.0) gp.data[static_cast<std::size_t>(i)] -= gs * ti / p.data[static_cast<std::size_t>(i)];
        }
        break;
      }
      case Op::Scale: {
        Tensor& gx = grad_of(node.inputs[0]);
        for (int i = 0; i < gx.size(); ++i) gx.data[static_cast<std::size_t>(i)] += node.c * g.data[static_cast<std::size_t>(i)];
        break;
      }
    }
  }
  return grads;
}

std::vector<Tensor> Tape::param_grads(int loss_node, int param_count) const {
  const std::vector<Tensor> grads = backward(loss_node);
  std::vector<Tensor> out(static_cast<std::size_t>(param_count));
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const int pid = nodes_[id].param_id;
    if (pid < 0 || grads[id].empty()) continue;
    if (out[static_cast<std::size_t>(pid)].empty()) {
      out[static_cast<std::size_t>(pid)] = grads[id];
    } else {
      Tensor& acc = out[static_cast<std::size_t>(pid)];
      for (int i = 0; i < acc.size(); ++i) acc.data[static_cast<std::size_t>(i)] += grads[id].data[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

}  // namespace crl
