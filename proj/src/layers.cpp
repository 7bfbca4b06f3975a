// SPDX-License-Identifier: Apache-2.0
#include "locs/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace locs {

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "elu") return Activation::elu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return relu(x);
    case Activation::elu: return elu(x, 1.0);
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
  }
  return x;
}

// ---------------------------------------------------------------------------

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng, bool bias)
    : in_(in), out_(out) {
  weight_ = store.add_uniform(name + ".weight", Shape{in, out}, in, rng);
  if (bias) bias_ = store.add_uniform(name + ".bias", Shape{out}, in, rng);
}

Var Linear::apply(ParameterStore& store, Graph& g, Var x) const {
  if (x.cols() != in_) {
    throw ShapeError("linear layer expects " + std::to_string(in_) + " input features, got " +
                     to_string(x.shape()));
  }
  Var y = matmul(x, g.parameter(store, weight_));
  if (bias_.valid()) y = add_row(y, g.parameter(store, bias_));
  return y;
}

// ---------------------------------------------------------------------------

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, std::size_t features)
    : features_(features) {
  gamma_ = store.add(name + ".gamma", Tensor(Shape{features}, 1.0));
  beta_ = store.add(name + ".beta", Tensor(Shape{features}, 0.0));
  running_mean_ = store.add(name + ".running_mean", Tensor(Shape{features}, 0.0), false);
  running_var_ = store.add(name + ".running_var", Tensor(Shape{features}, 1.0), false);
}

Var BatchNorm::apply(ParameterStore& store, Graph& g, Var x) const {
  const std::size_t R = x.rows(), C = x.cols();
  if (C != features_) {
    throw ShapeError("batch-norm over " + std::to_string(features_) + " features got " +
                     to_string(x.shape()));
  }
  Var gamma = g.parameter(store, gamma_);
  Var beta = g.parameter(store, beta_);
  const Tensor& xv = x.value();

  if (!g.training()) {
    const Tensor& rm = store.value(running_mean_);
    const Tensor& rv = store.value(running_var_);
    std::vector<double> inv(C);
    for (std::size_t j = 0; j < C; ++j) inv[j] = 1.0 / std::sqrt(rv[j] + kEpsilon);
    Tensor xhat(x.shape());
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) xhat[i * C + j] = (xv[i * C + j] - rm[j]) * inv[j];
    Tensor out(x.shape());
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) out[i * C + j] = gv[j] * xhat[i * C + j] + bv[j];
    const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
    return g.record(std::move(out), {x, gamma, beta},
                    [ix, ig, ib, R, C, inv, xhat = std::move(xhat)](Graph& g, const Tensor& go) {
                      const Tensor& gv = g.value(ig);
                      if (g.requires_grad(ix)) {
                        Tensor& gx = g.grad_buffer(ix);
                        for (std::size_t i = 0; i < R; ++i)
                          for (std::size_t j = 0; j < C; ++j)
                            gx[i * C + j] += go[i * C + j] * gv[j] * inv[j];
                      }
                      if (g.requires_grad(ig)) {
                        Tensor& gg = g.grad_buffer(ig);
                        for (std::size_t i = 0; i < R; ++i)
                          for (std::size_t j = 0; j < C; ++j) gg[j] += go[i * C + j] * xhat[i * C + j];
                      }
                      if (g.requires_grad(ib)) {
                        Tensor& gb = g.grad_buffer(ib);
                        for (std::size_t i = 0; i < R; ++i)
                          for (std::size_t j = 0; j < C; ++j) gb[j] += go[i * C + j];
                      }
                    });
  }

  if (R < 2) throw ShapeError("batch-norm in training mode needs at least two rows");
  std::vector<double> mu(C, 0.0), var(C, 0.0), inv(C);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) mu[j] += xv[i * C + j];
  for (double& m : mu) m /= static_cast<double>(R);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) {
      const double d = xv[i * C + j] - mu[j];
      var[j] += d * d;
    }
  for (double& v : var) v /= static_cast<double>(R);
  for (std::size_t j = 0; j < C; ++j) inv[j] = 1.0 / std::sqrt(var[j] + kEpsilon);

  Tensor& rm = store.value(running_mean_);
  Tensor& rv = store.value(running_var_);
  const double unbias = static_cast<double>(R) / static_cast<double>(R - 1);
  for (std::size_t j = 0; j < C; ++j) {
    rm[j] = (1.0 - kMomentum) * rm[j] + kMomentum * mu[j];
    rv[j] = (1.0 - kMomentum) * rv[j] + kMomentum * var[j] * unbias;
  }

  Tensor xhat(x.shape());
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) xhat[i * C + j] = (xv[i * C + j] - mu[j]) * inv[j];
  Tensor out(x.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] = gv[j] * xhat[i * C + j] + bv[j];

  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return g.record(
      std::move(out), {x, gamma, beta},
      [ix, ig, ib, R, C, inv = std::move(inv), xhat = std::move(xhat)](Graph& g, const Tensor& go) {
        const Tensor& gv = g.value(ig);
        std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
        for (std::size_t i = 0; i < R; ++i)
          for (std::size_t j = 0; j < C; ++j) {
            sum_dy[j] += go[i * C + j];
            sum_dy_xhat[j] += go[i * C + j] * xhat[i * C + j];
          }
        if (g.requires_grad(ix)) {
          Tensor& gx = g.grad_buffer(ix);
          const double n = static_cast<double>(R);
          for (std::size_t i = 0; i < R; ++i)
            for (std::size_t j = 0; j < C; ++j) {
              gx[i * C + j] += gv[j] * inv[j] *
                               (go[i * C + j] - sum_dy[j] / n - xhat[i * C + j] * sum_dy_xhat[j] / n);
            }
        }
        if (g.requires_grad(ig)) {
          Tensor& gg = g.grad_buffer(ig);
          for (std::size_t j = 0; j < C; ++j) gg[j] += sum_dy_xhat[j];
        }
        if (g.requires_grad(ib)) {
          Tensor& gb = g.grad_buffer(ib);
          for (std::size_t j = 0; j < C; ++j) gb[j] += sum_dy[j];
        }
      });
}

// ---------------------------------------------------------------------------

Mlp::Mlp(ParameterStore& store, const std::string& name, MlpSpec spec, std::mt19937_64& rng)
    : spec_(std::move(spec)) {
  if (spec_.dims.size() < 2 || spec_.activations.size() + 1 != spec_.dims.size()) {
    throw std::invalid_argument("mlp " + name + ": need one activation per layer");
  }
  for (std::size_t k = 0; k + 1 < spec_.dims.size(); ++k) {
    layers_.emplace_back(store, name + ".fc" + std::to_string(k), spec_.dims[k], spec_.dims[k + 1],
                         rng);
  }
  if (spec_.batch_norm) norm_.emplace(store, name + ".bn", spec_.dims.back());
}

Var Mlp::apply(ParameterStore& store, Graph& g, Var x) const {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    x = activate(layers_[k].apply(store, g, x), spec_.activations[k]);
  }
  if (norm_) x = norm_->apply(store, g, x);
  return x;
}

Var mlp_apply(const Mlp& mlp, ParameterStore& store, Graph& g, Var x) {
  return mlp.apply(store, g, x);
}

// ---------------------------------------------------------------------------

LstmCell::LstmCell(ParameterStore& store, const std::string& name, std::size_t in,
                   std::size_t hidden, std::mt19937_64& rng)
    : in_(in), hidden_(hidden) {
  wx_ = store.add_uniform(name + ".weight_ih", Shape{in, 4 * hidden}, hidden, rng);
  wh_ = store.add_uniform(name + ".weight_hh", Shape{hidden, 4 * hidden}, hidden, rng);
  b_ = store.add_uniform(name + ".bias", Shape{4 * hidden}, hidden, rng);
}

LstmState LstmCell::zero_state(Graph& g, std::size_t rows) const {
  return {g.constant(Tensor::matrix(rows, hidden_)), g.constant(Tensor::matrix(rows, hidden_))};
}

LstmState LstmCell::step(ParameterStore& store, Graph& g, Var x, const LstmState& state) const {
  if (x.cols() != in_ || state.h.cols() != hidden_ || state.c.cols() != hidden_ ||
      state.h.rows() != x.rows() || state.c.rows() != x.rows()) {
    throw ShapeError("lstm step: input " + to_string(x.shape()) + ", state " +
                     to_string(state.h.shape()) + "/" + to_string(state.c.shape()));
  }
  Var gates = add_row(matmul(x, g.parameter(store, wx_)) + matmul(state.h, g.parameter(store, wh_)),
                      g.parameter(store, b_));
  const std::size_t H = hidden_;
  Var i = sigmoid(slice_cols(gates, 0, H));
  Var f = sigmoid(slice_cols(gates, H, H));
  Var c_hat = tanh(slice_cols(gates, 2 * H, H));
  Var o = sigmoid(slice_cols(gates, 3 * H, H));
  Var c = f * state.c + i * c_hat;
  Var h = o * tanh(c);
  return {h, c};
}

// ---------------------------------------------------------------------------

GruCell::GruCell(ParameterStore& store, const std::string& name, std::size_t in,
                 std::size_t hidden, std::mt19937_64& rng)
    : in_(in), hidden_(hidden) {
  wx_ = store.add_uniform(name + ".weight_ih", Shape{in, 3 * hidden}, hidden, rng);
  wh_ = store.add_uniform(name + ".weight_hh", Shape{hidden, 3 * hidden}, hidden, rng);
  bx_ = store.add_uniform(name + ".bias_ih", Shape{3 * hidden}, hidden, rng);
  bh_ = store.add_uniform(name + ".bias_hh", Shape{3 * hidden}, hidden, rng);
}

Var GruCell::step(ParameterStore& store, Graph& g, Var x, Var h) const {
  if (x.cols() != in_ || h.cols() != hidden_ || h.rows() != x.rows()) {
    throw ShapeError("gru step: input " + to_string(x.shape()) + ", hidden " +
                     to_string(h.shape()));
  }
  const std::size_t H = hidden_;
  Var gx = add_row(matmul(x, g.parameter(store, wx_)), g.parameter(store, bx_));
  Var gh = add_row(matmul(h, g.parameter(store, wh_)), g.parameter(store, bh_));
  Var r = sigmoid(slice_cols(gx, 0, H) + slice_cols(gh, 0, H));
  Var z = sigmoid(slice_cols(gx, H, H) + slice_cols(gh, H, H));
  Var n = tanh(slice_cols(gx, 2 * H, H) + r * slice_cols(gh, 2 * H, H));
  return n + z * (h - n);
}

}  // namespace locs
