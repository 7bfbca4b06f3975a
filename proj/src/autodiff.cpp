// SPDX-License-Identifier: Apache-2.0
#include "locs/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace locs {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat as_matrix(const Tensor& t) {
  return ConstMapMat(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MapMat as_matrix(Tensor& t) {
  return MapMat(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void require_same_graph(Var a, Var b, const char* op) {
  if (&a.graph() != &b.graph()) {
    throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
  }
}

void require_same_shape(Var a, Var b, const char* op) {
  require_same_graph(a, b, op);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_matrix(Var a, const char* op) {
  if (a.value().rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + to_string(a.shape()));
  }
}

/// Elementwise unary op with derivative expressed through input and output values.
template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, deriv](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(ia);
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += go[i] * deriv(x[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------------------

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::parameter(ParameterStore& store, ParamId id) {
  if (store_ != nullptr && store_ != &store) {
    throw std::invalid_argument("graph parameters must come from a single store");
  }
  store_ = &store;
  Node n;
  n.value = store.value(id);
  n.requires_grad = store.entry(id).trainable;
  Var v = push(std::move(n));
  if (store.entry(id).trainable) param_nodes_.emplace_back(v.id(), id);
  return v;
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.graph() != this) {
      throw std::invalid_argument("operation input recorded on another graph");
    }
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    if (!g.same_shape(n.value)) throw ShapeError("gradient shape does not match its node");
    n.grad = g;
    n.has_grad = true;
    return;
  }
  n.grad += g;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape());
}

void Graph::backward(Var output) {
  if (&output.graph() != this) throw std::invalid_argument("backward: foreign output");
  if (output.value().size() != 1) {
    throw ShapeError("backward requires a scalar output, got " + to_string(output.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (!nodes_[output.id()].requires_grad) return;
  grad_buffer(output.id()).fill(1.0);
  for (std::size_t k = output.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
    n.grad = Tensor();
    n.has_grad = false;
  }
}

GradientMap Graph::parameter_gradients() const {
  GradientMap out;
  for (const auto& [node, pid] : param_nodes_) {
    const std::string& name = store_->entry(pid).name;
    Tensor g = grad(Var(const_cast<Graph*>(this), node));
    auto it = out.find(name);
    if (it == out.end()) {
      out.emplace(name, std::move(g));
    } else {
      it->second += g;
    }
  }
  return out;
}

void Graph::accumulate_into_store() const {
  for (const auto& [node, pid] : param_nodes_) {
    const Node& n = nodes_[node];
    if (!n.has_grad) continue;
    Tensor& g = store_->grad(pid);
    if (g.size() != n.grad.size()) g = Tensor(n.value.shape());
    g += n.grad;
  }
}

GradientMap evaluate_with_gradients(Graph& graph, Var output) {
  graph.backward(output);
  return graph.parameter_gradients();
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_graph(a, b, "matmul");
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    if (g.requires_grad(ia)) {
      as_matrix(g.grad_buffer(ia)).noalias() += as_matrix(go) * as_matrix(g.value(ib)).transpose();
    }
    if (g.requires_grad(ib)) {
      as_matrix(g.grad_buffer(ib)).noalias() += as_matrix(g.value(ia)).transpose() * as_matrix(go);
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    g.accumulate(ia, go);
    g.accumulate(ib, go);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    g.accumulate(ia, go);
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      const Tensor& y = g.value(ib);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      const Tensor& x = g.value(ia);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * x[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, s](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += s * go[i];
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v += s;
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a},
                          [ia](Graph& g, const Tensor& go) { g.accumulate(ia, go); });
}

Var add_row(Var a, Var row) {
  require_same_graph(a, row, "add_row");
  if (row.value().size() != a.cols()) {
    throw ShapeError("add_row: row of " + to_string(row.shape()) + " for " +
                     to_string(a.shape()));
  }
  Tensor out = a.value();
  const std::size_t R = out.rows(), C = out.cols();
  const Tensor& r = row.value();
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] += r[j];
  const std::size_t ia = a.id(), ir = row.id();
  return a.graph().record(std::move(out), {a, row}, [ia, ir, R, C](Graph& g, const Tensor& go) {
    g.accumulate(ia, go);
    if (g.requires_grad(ir)) {
      Tensor& gr = g.grad_buffer(ir);
      for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) gr[j] += go[i * C + j];
    }
  });
}

Var mul_col(Var a, Var w) {
  require_same_graph(a, w, "mul_col");
  const std::size_t R = a.rows(), C = a.cols();
  if (w.value().size() != R) {
    throw ShapeError("mul_col: weights " + to_string(w.shape()) + " for " + to_string(a.shape()));
  }
  Tensor out = a.value();
  const Tensor& wv = w.value();
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] *= wv[i];
  const std::size_t ia = a.id(), iw = w.id();
  return a.graph().record(std::move(out), {a, w}, [ia, iw, R, C](Graph& g, const Tensor& go) {
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      const Tensor& wv = g.value(iw);
      for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) ga[i * C + j] += go[i * C + j] * wv[i];
    }
    if (g.requires_grad(iw)) {
      Tensor& gw = g.grad_buffer(iw);
      const Tensor& x = g.value(ia);
      for (std::size_t i = 0; i < R; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < C; ++j) acc += go[i * C + j] * x[i * C + j];
        gw[i] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(Var a, double alpha) {
  return unary(a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
               [alpha](double x) { return x > 0.0 ? 1.0 : alpha * std::exp(x); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double t = std::tanh(x);
                 return 1.0 - t * t;
               });
}

namespace {
double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var a) {
  return unary(a, logistic, [](double x) {
    const double s = logistic(x);
    return s * (1.0 - s);
  });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

// ---------------------------------------------------------------------------

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v;
  const std::size_t ia = a.id();
  return a.graph().record(Tensor::scalar(s), {a}, [ia](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    const double d = go[0];
    for (double& v : ga.data()) v += d;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var softmax_rows(Var a) {
  Tensor out = a.value();
  const std::size_t R = out.rows(), C = out.cols();
  for (std::size_t i = 0; i < R; ++i) {
    double* row = out.data().data() + i * C;
    const double m = *std::max_element(row, row + C);
    double z = 0.0;
    for (std::size_t j = 0; j < C; ++j) z += (row[j] = std::exp(row[j] - m));
    for (std::size_t j = 0; j < C; ++j) row[j] /= z;
  }
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, R, C](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    const Tensor& x = g.value(ia);
    std::vector<double> s(C);
    for (std::size_t i = 0; i < R; ++i) {
      const double* row = x.data().data() + i * C;
      const double m = *std::max_element(row, row + C);
      double z = 0.0;
      for (std::size_t j = 0; j < C; ++j) z += (s[j] = std::exp(row[j] - m));
      double dot = 0.0;
      for (std::size_t j = 0; j < C; ++j) {
        s[j] /= z;
        dot += go[i * C + j] * s[j];
      }
      for (std::size_t j = 0; j < C; ++j) ga[i * C + j] += s[j] * (go[i * C + j] - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tensor out = a.value();
  const std::size_t R = out.rows(), C = out.cols();
  for (std::size_t i = 0; i < R; ++i) {
    double* row = out.data().data() + i * C;
    const double m = *std::max_element(row, row + C);
    double z = 0.0;
    for (std::size_t j = 0; j < C; ++j) z += std::exp(row[j] - m);
    const double lse = m + std::log(z);
    for (std::size_t j = 0; j < C; ++j) row[j] -= lse;
  }
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, R, C](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    const Tensor& x = g.value(ia);
    for (std::size_t i = 0; i < R; ++i) {
      const double* row = x.data().data() + i * C;
      const double m = *std::max_element(row, row + C);
      double z = 0.0;
      for (std::size_t j = 0; j < C; ++j) z += std::exp(row[j] - m);
      double gsum = 0.0;
      for (std::size_t j = 0; j < C; ++j) gsum += go[i * C + j];
      for (std::size_t j = 0; j < C; ++j) {
        ga[i * C + j] += go[i * C + j] - std::exp(row[j] - m) / z * gsum;
      }
    }
  });
}

// ---------------------------------------------------------------------------

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  Shape back = a.shape();
  return a.graph().record(std::move(out), {a}, [ia, back](Graph& g, const Tensor& go) {
    g.accumulate(ia, go.reshaped(back));
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t R = parts[0].rows();
  std::vector<std::size_t> widths, ids;
  std::size_t C = 0;
  for (const Var& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != R) {
      throw ShapeError("concat_cols: row mismatch " + to_string(p.shape()) + " vs " +
                       std::to_string(R));
    }
    widths.push_back(p.cols());
    ids.push_back(p.id());
    C += p.cols();
  }
  Tensor out = Tensor::matrix(R, C);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < R; ++i)
      std::copy_n(x.data().data() + i * w, w, out.data().data() + i * C + off);
    off += w;
  }
  return parts[0].graph().record(
      std::move(out), parts, [ids, widths, R, C](Graph& g, const Tensor& go) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const std::size_t w = widths[k];
          if (g.requires_grad(ids[k])) {
            Tensor& gk = g.grad_buffer(ids[k]);
            for (std::size_t i = 0; i < R; ++i)
              for (std::size_t j = 0; j < w; ++j) gk[i * w + j] += go[i * C + off + j];
          }
          off += w;
        }
      });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  require_matrix(a, "slice_cols");
  const std::size_t R = a.rows(), C = a.cols();
  if (start + count > C) throw ShapeError("slice_cols out of range for " + to_string(a.shape()));
  Tensor out = Tensor::matrix(R, count);
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < R; ++i)
    std::copy_n(x.data().data() + i * C + start, count, out.data().data() + i * count);
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a},
                          [ia, R, C, start, count](Graph& g, const Tensor& go) {
                            Tensor& ga = g.grad_buffer(ia);
                            for (std::size_t i = 0; i < R; ++i)
                              for (std::size_t j = 0; j < count; ++j)
                                ga[i * C + start + j] += go[i * count + j];
                          });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const std::size_t C = parts[0].cols();
  std::size_t R = 0;
  std::vector<std::size_t> ids, counts;
  for (const Var& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != C) throw ShapeError("concat_rows: column mismatch");
    ids.push_back(p.id());
    counts.push_back(p.rows());
    R += p.rows();
  }
  Tensor out = Tensor::matrix(R, C);
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + off);
    off += p.value().size();
  }
  return parts[0].graph().record(std::move(out), parts,
                                 [ids, counts, C](Graph& g, const Tensor& go) {
                                   std::size_t off = 0;
                                   for (std::size_t k = 0; k < ids.size(); ++k) {
                                     const std::size_t n = counts[k] * C;
                                     if (g.requires_grad(ids[k])) {
                                       Tensor& gk = g.grad_buffer(ids[k]);
                                       for (std::size_t i = 0; i < n; ++i) gk[i] += go[off + i];
                                     }
                                     off += n;
                                   }
                                 });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  require_matrix(a, "slice_rows");
  const std::size_t C = a.cols();
  if (start + count > a.rows()) throw ShapeError("slice_rows out of range");
  const auto& src = a.value().storage();
  Tensor out(Shape{count, C},
             std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(start * C),
                                 src.begin() + static_cast<std::ptrdiff_t>((start + count) * C)));
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, start, C](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[start * C + i] += go[i];
  });
}

Var gather_rows(Var a, std::vector<std::size_t> index) {
  require_matrix(a, "gather_rows");
  const std::size_t C = a.cols(), R = a.rows();
  Tensor out = Tensor::matrix(index.size(), C);
  const Tensor& x = a.value();
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= R) throw ShapeError("gather_rows index out of range");
    std::copy_n(x.data().data() + index[k] * C, C, out.data().data() + k * C);
  }
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a},
                          [ia, C, index = std::move(index)](Graph& g, const Tensor& go) {
                            Tensor& ga = g.grad_buffer(ia);
                            for (std::size_t k = 0; k < index.size(); ++k)
                              for (std::size_t j = 0; j < C; ++j)
                                ga[index[k] * C + j] += go[k * C + j];
                          });
}

Var segment_sum(Var a, std::vector<std::size_t> segment, std::size_t segments) {
  require_matrix(a, "segment_sum");
  const std::size_t C = a.cols();
  if (segment.size() != a.rows()) throw ShapeError("segment_sum: segment ids per row required");
  Tensor out = Tensor::matrix(segments, C);
  const Tensor& x = a.value();
  for (std::size_t k = 0; k < segment.size(); ++k) {
    if (segment[k] >= segments) throw ShapeError("segment_sum: id out of range");
    for (std::size_t j = 0; j < C; ++j) out[segment[k] * C + j] += x[k * C + j];
  }
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a},
                          [ia, C, segment = std::move(segment)](Graph& g, const Tensor& go) {
                            Tensor& ga = g.grad_buffer(ia);
                            for (std::size_t k = 0; k < segment.size(); ++k)
                              for (std::size_t j = 0; j < C; ++j)
                                ga[k * C + j] += go[segment[k] * C + j];
                          });
}

Var segment_mean(Var a, std::vector<std::size_t> segment, std::size_t segments) {
  std::vector<double> counts(segments, 0.0);
  for (std::size_t s : segment) {
    if (s >= segments) throw ShapeError("segment_mean: id out of range");
    counts[s] += 1.0;
  }
  Graph& g = a.graph();
  Var total = segment_sum(a, std::move(segment), segments);
  std::vector<double> inv(segments);
  for (std::size_t s = 0; s < segments; ++s) inv[s] = counts[s] > 0 ? 1.0 / counts[s] : 0.0;
  return mul_col(total, g.constant(Tensor(Shape{segments}, std::move(inv))));
}

Var rowwise_matvec(Var filters, Var x, std::size_t out_dim) {
  require_same_graph(filters, x, "rowwise_matvec");
  const std::size_t R = x.rows(), in_dim = x.cols();
  if (filters.rows() != R || filters.cols() != out_dim * in_dim) {
    throw ShapeError("rowwise_matvec: filters " + to_string(filters.shape()) + " for input " +
                     to_string(x.shape()) + " and output width " + std::to_string(out_dim));
  }
  Tensor out = Tensor::matrix(R, out_dim);
  const double* F = filters.value().data().data();
  const double* X = x.value().data().data();
  for (std::size_t r = 0; r < R; ++r) {
    const double* Fr = F + r * out_dim * in_dim;
    const double* xr = X + r * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < in_dim; ++k) acc += Fr[o * in_dim + k] * xr[k];
      out[r * out_dim + o] = acc;
    }
  }
  const std::size_t iF = filters.id(), iX = x.id();
  return filters.graph().record(
      std::move(out), {filters, x}, [iF, iX, R, in_dim, out_dim](Graph& g, const Tensor& go) {
        const bool needF = g.requires_grad(iF), needX = g.requires_grad(iX);
        const double* F = g.value(iF).data().data();
        const double* X = g.value(iX).data().data();
        double* gF = needF ? g.grad_buffer(iF).data().data() : nullptr;
        double* gX = needX ? g.grad_buffer(iX).data().data() : nullptr;
        for (std::size_t r = 0; r < R; ++r) {
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = go[r * out_dim + o];
            const std::size_t base = r * out_dim * in_dim + o * in_dim;
            for (std::size_t k = 0; k < in_dim; ++k) {
              if (needF) gF[base + k] += d * X[r * in_dim + k];
              if (needX) gX[r * in_dim + k] += d * F[base + k];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------

double gradient_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("gradient_check: h must be positive");
  Tensor analytic;
  {
    Graph g(false);
    Var x = g.variable(point);
    Var y = f(g, x);
    g.backward(y);
    analytic = g.grad(x);
  }
  auto eval = [&](const Tensor& p) {
    Graph g(false);
    Var x = g.constant(p);
    const double v = f(g, x).value().item();
    if (!std::isfinite(v)) throw std::domain_error("gradient_check: non-finite function value");
    return v;
  };
  double worst = 0.0;
  Tensor p = point;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x0 = p[i];
    p[i] = x0 + h;
    const double fp = eval(p);
    p[i] = x0 - h;
    const double fm = eval(p);
    p[i] = x0;
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

double gradient_check_parameters(const std::function<Var(Graph&)>& loss, ParameterStore& store,
                                 double h, std::size_t max_coords, std::uint64_t seed) {
  if (!(h > 0.0)) throw std::invalid_argument("gradient_check: h must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t e = 0; e < store.size(); ++e) {
    if (!store.entries()[e].trainable) continue;
    for (std::size_t i = 0; i < store.entries()[e].value.size(); ++i) coords.emplace_back(e, i);
  }
  if (max_coords != 0 && coords.size() > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  // Batch-norm running statistics are side effects of training-mode graphs;
  // restore them so every evaluation sees the same buffers.
  std::vector<Tensor> snapshot;
  for (const auto& e : store.entries()) snapshot.push_back(e.value);
  auto restore_buffers = [&] {
    for (std::size_t e = 0; e < store.size(); ++e)
      if (!store.entries()[e].trainable) store.entries()[e].value = snapshot[e];
  };

  GradientMap analytic;
  {
    Graph g(true);
    Var y = loss(g);
    analytic = evaluate_with_gradients(g, y);
  }
  restore_buffers();

  auto eval = [&] {
    Graph g(true);
    const double v = loss(g).value().item();
    restore_buffers();
    if (!std::isfinite(v)) throw std::domain_error("gradient_check: non-finite loss");
    return v;
  };

  double worst = 0.0;
  for (const auto& [e, i] : coords) {
    auto& entry = store.entries()[e];
    const double x0 = entry.value[i];
    entry.value[i] = x0 + h;
    const double fp = eval();
    entry.value[i] = x0 - h;
    const double fm = eval();
    entry.value[i] = x0;
    const double fd = (fp - fm) / (2.0 * h);
    const auto it = analytic.find(entry.name);
    const double ad = it == analytic.end() ? 0.0 : it->second[i];
    worst = std::max(worst, std::abs(ad - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace locs
