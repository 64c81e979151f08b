#include "crl/nn.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crl/error.hpp"

namespace crl {

int ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

TapeParams push_params(Tape& tape, const ParamSet& params) {
  TapeParams tp;
  tp.node.reserve(params.values.size());
  for (int id = 0; id < params.count(); ++id) {
    tp.node.push_back(tape.leaf(params[id], id));
  }
  return tp;
}

void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (state.m.size() != params.values.size()) {
    state.m.assign(params.values.size(), Tensor());
    state.v.assign(params.values.size(), Tensor());
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (int id = 0; id < params.count(); ++id) {
    Tensor& p = params[id];
    Tensor& m = state.m[static_cast<std::size_t>(id)];
    Tensor& v = state.v[static_cast<std::size_t>(id)];
    if (m.empty()) {
      m = Tensor(p.rows, p.cols);
      v = Tensor(p.rows, p.cols);
    }
    const Tensor* g = id < static_cast<int>(grads.size()) ? &grads[static_cast<std::size_t>(id)] : nullptr;
    if (g && !g->empty() && !g->same_shape(p)) {
      fail("shape", "adam grad shape " + g->shape_str() + " vs param " + p.shape_str());
    }
    for (int i = 0; i < p.size(); ++i) {
      const double gi = (g && !g->empty()) ? g->data[static_cast<std::size_t>(i)] : 0.0;
      double& mi = m.data[static_cast<std::size_t>(i)];
      double& vi = v.data[static_cast<std::size_t>(i)];
      mi = state.beta1 * mi + (1.0 - state.beta1) * gi;
      vi = state.beta2 * vi + (1.0 - state.beta2) * gi * gi;
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.data[static_cast<std::size_t>(i)] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

GruParamIds add_gru_params(ParamSet& params, const std::string& prefix, int in_dim,
                           int hidden, SeededRng& rng) {
  GruParamIds g;
  g.wz = params.add(prefix + ".wz", init_params(in_dim, hidden, InitScheme::UniformXavier, rng));
  g.uz = params.add(prefix + ".uz", init_params(hidden, hidden, InitScheme::UniformXavier, rng));
  g.bz = params.add(prefix + ".bz", init_params(1, hidden, InitScheme::Zeros, rng));
  g.wr = params.add(prefix + ".wr", init_params(in_dim, hidden, InitScheme::UniformXavier, rng));
  g.ur = params.add(prefix + ".ur", init_params(hidden, hidden, InitScheme::UniformXavier, rng));
  g.br = params.add(prefix + ".br", init_params(1, hidden, InitScheme::Zeros, rng));
  g.wh = params.add(prefix + ".wh", init_params(in_dim, hidden, InitScheme::UniformXavier, rng));
  g.uh = params.add(prefix + ".uh", init_params(hidden, hidden, InitScheme::UniformXavier, rng));
  g.bh = params.add(prefix + ".bh", init_params(1, hidden, InitScheme::Zeros, rng));
  return g;
}

int gru_cell(Tape& tape, const TapeParams& tp, const GruParamIds& g, int x_node,
             int h_node) {
  const int z = tape.logistic(tape.add(tape.add(tape.matmul(x_node, tp[g.wz]), tape.matmul(h_node, tp[g.uz])), tp[g.bz]));
  const int r = tape.logistic(tape.add(tape.add(tape.matmul(x_node, tp[g.wr]), tape.matmul(h_node, tp[g.ur])), tp[g.br]));
  const int rh = tape.mul(r, h_node);
  const int cand = tape.tanh(tape.add(tape.add(tape.matmul(x_node, tp[g.wh]), tape.matmul(rh, tp[g.uh])), tp[g.bh]));
  // h' = h + z . (cand - h)
  const int delta = tape.add(cand, tape.scale(h_node, -1.0));
  return tape.add(h_node, tape.mul(z, delta));
}

namespace {

// Mirrors the tape composition: x W + h U + b, same accumulation order.
Tensor gate_preact(const Tensor& x, const Tensor& w, const Tensor& h, const Tensor& u,
                   const Tensor& b) {
  Tensor a = matmul_plain(x, w);
  const Tensor c = matmul_plain(h, u);
  for (int i = 0; i < a.size(); ++i) a.data[static_cast<std::size_t>(i)] += c.data[static_cast<std::size_t>(i)];
  for (int i = 0; i < a.size(); ++i) a.data[static_cast<std::size_t>(i)] += b.data[static_cast<std::size_t>(i)];
  return a;
}

}  // namespace

Tensor gru_cell_plain(const ParamSet& p, const GruParamIds& g, const Tensor& x,
                      const Tensor& h) {
  Tensor z = gate_preact(x, p[g.wz], h, p[g.uz], p[g.bz]);
  for (double& v : z.data) v = 1.0 / (1.0 + std::exp(-v));
  Tensor r = gate_preact(x, p[g.wr], h, p[g.ur], p[g.br]);
  for (double& v : r.data) v = 1.0 / (1.0 + std::exp(-v));
  Tensor rh = r;
  for (int i = 0; i < rh.size(); ++i) rh.data[static_cast<std::size_t>(i)] *= h.data[static_cast<std::size_t>(i)];
  Tensor cand = gate_preact(x, p[g.wh], rh, p[g.uh], p[g.bh]);
  for (double& v : cand.data) v = std::tanh(v);
  Tensor out = h;
  for (int i = 0; i < out.size(); ++i) {
    const double delta = cand.data[static_cast<std::size_t>(i)] + (-1.0) * h.data[static_cast<std::size_t>(i)];
    out.data[static_cast<std::size_t>(i)] = h.data[static_cast<std::size_t>(i)] + z.data[static_cast<std::size_t>(i)] * delta;
  }
  return out;
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows) {
    fail("shape", "matmul mismatch " + a.shape_str() + " * " + b.shape_str());
  }
  Tensor out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* out_row = out.row_ptr(i);
    for (int k = 0; k < a.cols; ++k) {
      const double av = a.at(i, k);
      if (av == 0.0) continue;
      const double* b_row = b.row_ptr(k);
      for (int j = 0; j < b.cols; ++j) out_row[j] += av * b_row[j];
    }
  }
  return out;
}

Tensor affine_plain(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor out = matmul_plain(x, w);
  for (int r = 0; r < out.rows; ++r) {
    double* row = out.row_ptr(r);
    for (int j = 0; j < out.cols; ++j) row[j] += b.data[static_cast<std::size_t>(j)];
  }
  return out;
}

void softmax_row_inplace(Tensor& t) {
  for (int r = 0; r < t.rows; ++r) {
    double* row = t.row_ptr(r);
    double mx = row[0];
    for (int j = 1; j < t.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < t.cols; ++j) sum += std::exp(row[j] - mx);
    for (int j = 0; j < t.cols; ++j) row[j] = std::exp(row[j] - mx) / sum;
  }
}

void log_softmax_row_inplace(Tensor& t) {
  for (int r = 0; r < t.rows; ++r) {
    double* row = t.row_ptr(r);
    double mx = row[0];
    for (int j = 1; j < t.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < t.cols; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < t.cols; ++j) row[j] -= lse;
  }
}

Tensor concat_cols(const std::vector<const Tensor*>& xs) {
  if (xs.empty()) fail("shape", "concat of nothing");
  const int rows = xs[0]->rows;
  int cols = 0;
  for (const Tensor* x : xs) {
    if (x->rows != rows) fail("shape", "concat row mismatch");
    cols += x->cols;
  }
  Tensor out(rows, cols);
  int at = 0;
  for (const Tensor* x : xs) {
    for (int r = 0; r < rows; ++r) {
      for (int j = 0; j < x->cols; ++j) out.at(r, at + j) = x->at(r, j);
    }
    at += x->cols;
  }
  return out;
}

// --- checkpoint io ----------------------------------------------------------

std::string format_g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::string* Checkpoint::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot write checkpoint: " + path);
  out << "crl-checkpoint 1\n";
  for (const auto& [k, v] : ckpt.meta) out << "meta " << k << " " << v << "\n";
  for (int id = 0; id < ckpt.params.count(); ++id) {
    const Tensor& t = ckpt.params[id];
    out << "param " << ckpt.params.names[static_cast<std::size_t>(id)] << " " << t.rows
        << " " << t.cols << "\n";
    for (int r = 0; r < t.rows; ++r) {
      for (int c = 0; c < t.cols; ++c) {
        if (c) out << " ";
        out << format_g17(t.at(r, c));
      }
      out << "\n";
    }
  }
  out << "end\n";
  if (!out) fail("io", "failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("checkpoint-missing", "cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "crl-checkpoint 1") {
    fail("checkpoint", "unrecognized checkpoint header in " + path);
  }
  Checkpoint ckpt;
  while (std::getline(in, line)) {
    if (line == "end") return ckpt;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta.emplace_back(key, value);
    } else if (tag == "param") {
      std::string name;
      int rows = 0, cols = 0;
      ls >> name >> rows >> cols;
      if (name.empty() || rows <= 0 || cols <= 0) fail("checkpoint", "bad param header: " + line);
      Tensor t(rows, cols);
      for (int r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) fail("checkpoint", "truncated checkpoint: " + path);
        const char* s = line.c_str();
        char* endp = nullptr;
        for (int c = 0; c < cols; ++c) {
          t.at(r, c) = std::strtod(s, &endp);
          if (endp == s) fail("checkpoint", "bad value row in " + path);
          s = endp;
        }
      }
      ckpt.params.add(name, std::move(t));
    } else if (!tag.empty()) {
      fail("checkpoint", "unexpected line in checkpoint: " + line);
    }
  }
  fail("checkpoint", "missing end marker in " + path);
}

}  // namespace crl
