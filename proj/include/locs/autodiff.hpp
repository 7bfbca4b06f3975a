// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "locs/params.hpp"
#include "locs/tensor.hpp"

namespace locs {

class Graph;

/// Handle to a value recorded on a Graph.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

using GradientMap = std::map<std::string, Tensor>;

/// Define-by-run computation record for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, which is a topological order, so
/// the backward pass is a single reverse sweep. A graph is built and
/// differentiated by one thread.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

  explicit Graph(bool training = false) : training_(training) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Batch-norm uses batch statistics (and updates running stats) when true.
  bool training() const noexcept { return training_; }

  Var constant(Tensor value);
  /// Leaf that receives a gradient.
  Var variable(Tensor value);
  /// Leaf bound to a store entry; all parameters of one graph share a store.
  Var parameter(ParameterStore& store, ParamId id);

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  /// Reverse sweep from a scalar output. Throws ShapeError for non-scalars.
  void backward(Var output);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient of the last backward() output for leaves; zeros when none
  /// reached the node. Intermediate gradients are released during the sweep.
  Tensor grad(Var v) const;
  /// Accumulates into the gradient slot of a node that requires gradients.
  void accumulate(std::size_t id, const Tensor& g);
  Tensor& grad_buffer(std::size_t id);

  /// Gradient for every parameter leaf, keyed by store name.
  GradientMap parameter_gradients() const;
  /// Adds parameter gradients into the store's grad tensors.
  void accumulate_into_store() const;

  std::size_t size() const noexcept { return nodes_.size(); }
  ParameterStore* store() const noexcept { return store_; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
    Tensor grad;
  };

  Var push(Node node);

  bool training_;
  std::deque<Node> nodes_;
  std::vector<std::pair<std::size_t, ParamId>> param_nodes_;
  ParameterStore* store_ = nullptr;
};

/// Runs backward from `output` and returns d output / d parameter.
GradientMap evaluate_with_gradients(Graph& graph, Var output);

// ---------------------------------------------------------------------------
// Differentiable operations. Binary elementwise ops require equal shapes.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a[r, c] + row[c] for every row r.
Var add_row(Var a, Var row);
/// a[r, c] * w[r] for every column c; w has one entry per row.
Var mul_col(Var a, Var w);

Var relu(Var a);
Var elu(Var a, double alpha = 1.0);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

Var sum(Var a);
Var mean(Var a);
/// Row-wise softmax over the trailing extent.
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

Var reshape(Var a, Shape shape);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t start, std::size_t count);
/// out[k] = a[index[k]].
Var gather_rows(Var a, std::vector<std::size_t> index);
/// out[s] = sum over k with segment[k] == s of a[k].
Var segment_sum(Var a, std::vector<std::size_t> segment, std::size_t segments);
/// Like segment_sum but divided by each segment's size (empty segments give zero).
Var segment_mean(Var a, std::vector<std::size_t> segment, std::size_t segments);
/// Per-row matrix-vector product: out[r] = F[r] (as out_dim x in_dim) * x[r].
Var rowwise_matvec(Var filters, Var x, std::size_t out_dim);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// ---------------------------------------------------------------------------
// Finite-difference checking.

/// max over coordinates of |autodiff - central difference| / max(1, |central difference|).
double gradient_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point, double h);

/// Same measure over selected coordinates of the trainable parameters in `store`.
/// `loss` builds the scalar on a fresh graph. When `max_coords` is nonzero a
/// deterministic random subset of that many coordinates is checked.
double gradient_check_parameters(const std::function<Var(Graph&)>& loss, ParameterStore& store,
                                 double h, std::size_t max_coords = 0,
                                 std::uint64_t seed = 0);

}  // namespace locs
