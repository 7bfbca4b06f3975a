// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "locs/autodiff.hpp"
#include "locs/params.hpp"

namespace locs {

enum class Activation { identity, relu, elu, tanh, sigmoid };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);
Var activate(Var x, Activation a);

/// y = x W + b with W stored as [in, out].
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng, bool bias = true);

  Var apply(ParameterStore& store, Graph& g, Var x) const;

  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }
  ParamId weight() const noexcept { return weight_; }
  ParamId bias() const noexcept { return bias_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  ParamId weight_, bias_;
};

/// Per-feature batch normalization over rows.
///
/// Training graphs normalize with batch statistics and update the running
/// mean/variance (momentum 0.1, unbiased variance); inference graphs apply the
/// fixed affine map given by the running statistics.
class BatchNorm {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm() = default;
  BatchNorm(ParameterStore& store, const std::string& name, std::size_t features);

  Var apply(ParameterStore& store, Graph& g, Var x) const;

  std::size_t features() const noexcept { return features_; }
  ParamId gamma() const noexcept { return gamma_; }
  ParamId beta() const noexcept { return beta_; }
  ParamId running_mean() const noexcept { return running_mean_; }
  ParamId running_var() const noexcept { return running_var_; }

 private:
  std::size_t features_ = 0;
  ParamId gamma_, beta_, running_mean_, running_var_;
};

/// Layer list: `dims` has one more entry than `activations`; activation k
/// follows linear layer k. An optional batch-norm closes the stack.
struct MlpSpec {
  std::vector<std::size_t> dims;
  std::vector<Activation> activations;
  bool batch_norm = false;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, MlpSpec spec, std::mt19937_64& rng);

  Var apply(ParameterStore& store, Graph& g, Var x) const;

  const MlpSpec& spec() const noexcept { return spec_; }
  const std::vector<Linear>& layers() const noexcept { return layers_; }

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
  std::optional<BatchNorm> norm_;
};

Var mlp_apply(const Mlp& mlp, ParameterStore& store, Graph& g, Var x);

struct LstmState {
  Var h;
  Var c;
};

/// LSTM cell with gate blocks ordered input, forget, cell, output.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
           std::mt19937_64& rng);

  LstmState step(ParameterStore& store, Graph& g, Var x, const LstmState& state) const;
  LstmState zero_state(Graph& g, std::size_t rows) const;

  std::size_t input_size() const noexcept { return in_; }
  std::size_t hidden_size() const noexcept { return hidden_; }
  ParamId input_weight() const noexcept { return wx_; }
  ParamId hidden_weight() const noexcept { return wh_; }
  ParamId bias() const noexcept { return b_; }

 private:
  std::size_t in_ = 0, hidden_ = 0;
  ParamId wx_, wh_, b_;
};

/// GRU cell with gate blocks ordered reset, update, candidate:
/// r = s(x Wr + h Ur), z = s(x Wz + h Uz), n = tanh(x Wn + r * (h Un)),
/// h' = (1 - z) * n + z * h.
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
          std::mt19937_64& rng);

  Var step(ParameterStore& store, Graph& g, Var x, Var h) const;

  std::size_t input_size() const noexcept { return in_; }
  std::size_t hidden_size() const noexcept { return hidden_; }
  ParamId input_weight() const noexcept { return wx_; }
  ParamId hidden_weight() const noexcept { return wh_; }
  ParamId input_bias() const noexcept { return bx_; }
  ParamId hidden_bias() const noexcept { return bh_; }

 private:
  std::size_t in_ = 0, hidden_ = 0;
  ParamId wx_, wh_, bx_, bh_;
};

}  // namespace locs
