#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "hfusion/errors.hpp"
#include "hfusion/matrix.hpp"
#include "hfusion/rng.hpp"

namespace hfusion {

enum class Act { relu, identity };

inline const char* act_name(Act a) {
  return a == Act::relu ? "relu" : "identity";
}

inline Act act_from_name(const std::string& s) {
  if (s == "relu") return Act::relu;
  if (s == "identity") return Act::identity;
  fail(Errc::schema_mismatch, "unknown activation '" + s + "'");
}

// One affine layer, weight stored out x in.
struct Layer {
  Mat w;
  Vec b;
  Act act = Act::identity;
};

struct Mlp {
  std::vector<Layer> layers;

  int in_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
  int out_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.w.data.size() + l.b.size();
    return n;
  }
};

inline bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t k = 0; k < a.layers.size(); ++k) {
    if (!(a.layers[k].w == b.layers[k].w) || a.layers[k].b != b.layers[k].b ||
        a.layers[k].act != b.layers[k].act)
      return false;
  }
  return true;
}

// Fan-in scaled uniform init (bound sqrt(6/fan_in)), zero biases. The last
// layer gets an identity activation, all hidden layers relu.
inline Mlp make_mlp(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) fail(Errc::bad_config, "mlp needs at least one layer");
  Mlp net;
  for (size_t k = 0; k + 1 < dims.size(); ++k) {
    Layer l;
    l.w = Mat(dims[k + 1], dims[k]);
    l.b.assign(dims[k + 1], 0.0);
    l.act = (k + 2 < dims.size()) ? Act::relu : Act::identity;
    const double bound = std::sqrt(6.0 / dims[k]);
    for (double& v : l.w.data) v = (2.0 * rng.uniform() - 1.0) * bound;
    net.layers.push_back(std::move(l));
  }
  return net;
}

// Intermediates recorded by forward for the matching backward call.
struct Tape {
  std::vector<Mat> inputs;  // inputs[k]: activations entering layer k
  std::vector<Mat> pre;     // pre[k]: pre-activation outputs of layer k
};

inline Mat forward(const Mlp& net, const Mat& x, Tape* tape = nullptr) {
  if (net.layers.empty()) fail(Errc::shape_mismatch, "empty network");
  if (x.cols != net.in_dim())
    fail(Errc::shape_mismatch, "input width " + std::to_string(x.cols) +
                                   " != " + std::to_string(net.in_dim()));
  if (x.rows < 1) fail(Errc::shape_mismatch, "empty batch");
  if (!x.all_finite()) fail(Errc::non_finite_input, "forward input");

  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Mat a = x;
  for (const auto& l : net.layers) {
    Mat z = matmul_nt(a, l.w);
    for (int i = 0; i < z.rows; ++i)
      for (int j = 0; j < z.cols; ++j) z(i, j) += l.b[j];
    if (tape) {
      tape->inputs.push_back(std::move(a));
      tape->pre.push_back(z);
    }
    if (l.act == Act::relu) {
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    a = std::move(z);
  }
  return a;
}

// Per-parameter gradients, same shapes as the owning Mlp.
struct Grads {
  std::vector<Mat> w;
  std::vector<Vec> b;
};

inline Grads zero_grads(const Mlp& net) {
  Grads g;
  for (const auto& l : net.layers) {
    g.w.emplace_back(l.w.rows, l.w.cols);
    g.b.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

inline void accumulate(Grads& into, const Grads& from) {
  if (into.w.size() != from.w.size()) fail(Errc::shape_mismatch, "grad count");
  for (size_t k = 0; k < into.w.size(); ++k) {
    add_inplace(into.w[k], from.w[k]);
    for (size_t i = 0; i < into.b[k].size(); ++i) into.b[k][i] += from.b[k][i];
  }
}

// Reverse-mode gradients of the forward map contracted with output_grad.
// Returns parameter grads; optionally also the gradient w.r.t. the input
// batch (needed when a loss on downstream features chains into this net).
inline Grads backward(const Mlp& net, const Tape& tape, const Mat& output_grad,
                      Mat* input_grad = nullptr) {
  const size_t nl = net.layers.size();
  if (tape.inputs.size() != nl || tape.pre.size() != nl)
    fail(Errc::tape_mismatch, "tape layer count");
  if (output_grad.rows != tape.pre.back().rows ||
      output_grad.cols != tape.pre.back().cols)
    fail(Errc::tape_mismatch, "output_grad shape");

  Grads g = zero_grads(net);
  Mat grad = output_grad;
  for (size_t k = nl; k-- > 0;) {
    const Layer& l = net.layers[k];
    if (tape.inputs[k].cols != l.w.cols)
      fail(Errc::tape_mismatch, "tape/net layer width");
    if (l.act == Act::relu) {
      const Mat& pre = tape.pre[k];
      for (size_t i = 0; i < grad.data.size(); ++i)
        if (pre.data[i] <= 0.0) grad.data[i] = 0.0;
    }
    g.w[k] = matmul_tn(grad, tape.inputs[k]);
    for (int j = 0; j < grad.cols; ++j) {
      double s = 0.0;
      for (int i = 0; i < grad.rows; ++i) s += grad(i, j);
      g.b[k][j] = s;
    }
    if (k > 0 || input_grad) grad = matmul(grad, l.w);
  }
  if (input_grad) *input_grad = std::move(grad);
  return g;
}

// SGD with classic momentum and L2 folded into the gradient:
//   v <- momentum*v + grad + weight_decay*param;  param <- param - lr*v
struct OptimState {
  double lr = 0.01;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::vector<Mat> vw;
  std::vector<Vec> vb;
};

inline OptimState make_optim(const Mlp& net, double lr, double momentum,
                             double weight_decay) {
  if (lr < 0 || momentum < 0 || weight_decay < 0)
    fail(Errc::bad_config, "optimizer hyperparameters must be >= 0");
  OptimState s;
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  for (const auto& l : net.layers) {
    s.vw.emplace_back(l.w.rows, l.w.cols);
    s.vb.emplace_back(l.b.size(), 0.0);
  }
  return s;
}

inline void sgd_step(Mlp& net, const Grads& g, OptimState& s) {
  if (g.w.size() != net.layers.size() || s.vw.size() != net.layers.size())
    fail(Errc::shape_mismatch, "sgd_step layer count");
  for (size_t k = 0; k < net.layers.size(); ++k) {
    Layer& l = net.layers[k];
    if (!g.w[k].same_shape(l.w) || g.b[k].size() != l.b.size())
      fail(Errc::shape_mismatch, "sgd_step tensor shape");
    for (size_t i = 0; i < l.w.data.size(); ++i) {
      double& v = s.vw[k].data[i];
      v = s.momentum * v + g.w[k].data[i] + s.weight_decay * l.w.data[i];
      l.w.data[i] -= s.lr * v;
    }
    for (size_t i = 0; i < l.b.size(); ++i) {
      double& v = s.vb[k][i];
      v = s.momentum * v + g.b[k][i] + s.weight_decay * l.b[i];
      l.b[i] -= s.lr * v;
    }
  }
}

namespace detail {

inline double* param_at(Mlp& net, size_t flat) {
  for (auto& l : net.layers) {
    if (flat < l.w.data.size()) return &l.w.data[flat];
    flat -= l.w.data.size();
    if (flat < l.b.size()) return &l.b[flat];
    flat -= l.b.size();
  }
  return nullptr;
}

inline double grad_at(const Grads& g, size_t flat) {
  for (size_t k = 0; k < g.w.size(); ++k) {
    if (flat < g.w[k].data.size()) return g.w[k].data[flat];
    flat -= g.w[k].data.size();
    if (flat < g.b[k].size()) return g.b[k][flat];
    flat -= g.b[k].size();
  }
  return 0.0;
}

}  // namespace detail

// Central-difference verification of an analytic gradient. `loss` must be a
// deterministic function of the parameters returning (value, grads). Checks
// at least min_coords coordinates (seeded subsample when the net is larger)
// and returns the worst relative error with denominator max(|a|,|n|,1e-8).
inline double finite_diff_check(
    Mlp& net, const std::function<std::pair<double, Grads>(const Mlp&)>& loss,
    double eps, size_t min_coords = 50, std::uint64_t seed = 0) {
  if (eps <= 0) fail(Errc::bad_config, "eps must be positive");
  const auto [base, analytic] = loss(net);
  if (!std::isfinite(base)) fail(Errc::non_finite_loss, "loss at base point");

  const size_t total = net.param_count();
  std::vector<size_t> coords(total);
  std::iota(coords.begin(), coords.end(), size_t{0});
  size_t n_check = total;
  if (total > min_coords) {
    Rng rng(seed);
    rng.partial_shuffle(coords, min_coords);
    n_check = min_coords;
  }

  double worst = 0.0;
  for (size_t c = 0; c < n_check; ++c) {
    double* p = detail::param_at(net, coords[c]);
    const double orig = *p;
    *p = orig + eps;
    const double lp = loss(net).first;
    *p = orig - eps;
    const double lm = loss(net).first;
    *p = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm))
      fail(Errc::non_finite_loss, "loss at perturbed point");
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = detail::grad_at(analytic, coords[c]);
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace hfusion
