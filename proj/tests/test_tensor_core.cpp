// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "helpers.hpp"
#include "locs/autodiff.hpp"
#include "locs/checkpoint.hpp"
#include "locs/layers.hpp"
#include "locs/optim.hpp"
#include "locs/params.hpp"

using namespace locs;
using locs::test::random_tensor;
using locs::test::TempDir;

namespace {

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Generic scalar read-out so every output entry carries a distinct weight.
Var readout(Graph& g, Var y, std::mt19937_64& rng) {
  return sum(mul(y, g.constant(random_tensor(y.rows(), y.cols(), rng))));
}

using OpFn = std::function<Var(Graph&, Var, std::mt19937_64&, std::size_t, std::size_t)>;

}  // namespace

TEST_CASE("gradient of x*x at 3 is 6") {
  Graph g;
  Var x = g.variable(Tensor::scalar(3.0));
  g.backward(mul(x, x));
  CHECK(g.grad(x).item() == 6.0);
}

TEST_CASE("gradient of sum(W v) with v = (1, 1) broadcasts v") {
  ParameterStore store;
  const ParamId w = store.add("w", Tensor::matrix(2, 2, {1.0, -2.0, 0.5, 4.0}));
  Graph g;
  Var y = sum(matmul(g.parameter(store, w), g.constant(Tensor::matrix(2, 1, {1.0, 1.0}))));
  const GradientMap grads = evaluate_with_gradients(g, y);
  const Tensor& gw = grads.at("w");
  for (double v : gw.data()) CHECK(v == 1.0);
}

TEST_CASE("softmax cross-entropy gradient at uniform logits is softmax minus one-hot") {
  const std::size_t K = 4, target = 2;
  auto f = [&](Graph& g, Var logits) {
    Tensor onehot = Tensor::matrix(1, K);
    onehot[target] = 1.0;
    return scale(sum(mul(log_softmax_rows(logits), g.constant(onehot))), -1.0);
  };
  Graph g;
  Var x = g.variable(Tensor::matrix(1, K, 0.0));
  g.backward(f(g, x));
  const Tensor grad = g.grad(x);
  for (std::size_t k = 0; k < K; ++k) {
    const double expect = 1.0 / K - (k == target ? 1.0 : 0.0);
    // Central differences as the oracle.
    const double h = 1e-5;
    Tensor p = Tensor::matrix(1, K, 0.0), m = Tensor::matrix(1, K, 0.0);
    p[k] = h;
    m[k] = -h;
    Graph gp, gm;
    const double fd = (f(gp, gp.constant(p)).value().item() - f(gm, gm.constant(m)).value().item()) / (2 * h);
    CHECK(grad[k] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(grad[k] - fd) < 1e-9);
  }
}

TEST_CASE("evaluate_with_gradients rejects non-scalar outputs") {
  Graph g;
  Var x = g.variable(Tensor::matrix(2, 2, 1.0));
  CHECK_THROWS_AS(g.backward(x), ShapeError);
}

TEST_CASE("forward shape mismatches throw") {
  Graph g;
  Var a = g.constant(Tensor::matrix(2, 3));
  Var b = g.constant(Tensor::matrix(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, g.constant(Tensor::matrix(3, 2))), ShapeError);
}

TEST_CASE("gradient_check on a sum of squares is exact") {
  std::mt19937_64 rng(1);
  const Tensor p = random_tensor(3, 4, rng, -3, 3);
  CHECK(gradient_check([](Graph&, Var x) { return sum(square(x)); }, p, 1e-5) < 1e-8);
}

TEST_CASE("every differentiable operation passes gradient_check on 50 seeds") {
  const std::vector<std::pair<std::string, OpFn>> ops = {
      {"matmul left", [](Graph& g, Var x, std::mt19937_64& r, std::size_t, std::size_t c) {
         return matmul(x, g.constant(random_tensor(c, 1 + r() % 8, r)));
       }},
      {"matmul right", [](Graph& g, Var x, std::mt19937_64& r, std::size_t rows, std::size_t) {
         return matmul(g.constant(random_tensor(1 + r() % 8, rows, r)), x);
       }},
      {"add", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t b) {
         return add(g.constant(random_tensor(a, b, r)), x);
       }},
      {"sub", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t b) {
         return sub(g.constant(random_tensor(a, b, r)), x);
       }},
      {"mul", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t b) {
         return mul(x, g.constant(random_tensor(a, b, r)));
       }},
      {"mul self", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return mul(x, x); }},
      {"scale", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return scale(x, -1.7); }},
      {"add_scalar", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return add_scalar(x, 0.3); }},
      {"add_row", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t b) {
         return add_row(g.constant(random_tensor(a, b, r)), slice_rows(x, 0, 1));
       }},
      {"add_row matrix", [](Graph& g, Var x, std::mt19937_64& r, std::size_t, std::size_t b) {
         return add_row(x, g.constant(random_tensor(1, b, r)));
       }},
      {"mul_col", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t) {
         return mul_col(x, g.constant(random_tensor(a, 1, r)));
       }},
      {"mul_col weights", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t) {
         return mul_col(g.constant(random_tensor(a, 3, r)), slice_cols(x, 0, 1));
       }},
      {"relu", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return relu(x); }},
      {"elu", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return elu(x); }},
      {"tanh", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return tanh(x); }},
      {"sigmoid", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return sigmoid(x); }},
      {"exp", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return exp(x); }},
      {"log", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return log(add_scalar(square(x), 0.5)); }},
      {"square", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return square(x); }},
      {"mean", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return reshape(mean(x), {1, 1}); }},
      {"softmax_rows", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return softmax_rows(x); }},
      {"log_softmax_rows", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t) { return log_softmax_rows(x); }},
      {"reshape", [](Graph&, Var x, std::mt19937_64&, std::size_t a, std::size_t b) { return reshape(x, {b, a}); }},
      {"concat_cols", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t) {
         return concat_cols({g.constant(random_tensor(a, 2, r)), x, square(x)});
       }},
      {"slice_cols", [](Graph&, Var x, std::mt19937_64&, std::size_t, std::size_t b) {
         return slice_cols(x, b / 2, b - b / 2);
       }},
      {"concat_rows", [](Graph& g, Var x, std::mt19937_64& r, std::size_t, std::size_t b) {
         return concat_rows(std::vector<Var>{x, g.constant(random_tensor(2, b, r)), tanh(x)});
       }},
      {"slice_rows", [](Graph&, Var x, std::mt19937_64&, std::size_t a, std::size_t) {
         return slice_rows(x, a / 2, a - a / 2);
       }},
      {"gather_rows", [](Graph&, Var x, std::mt19937_64& r, std::size_t a, std::size_t) {
         std::vector<std::size_t> idx(2 * a);
         for (auto& i : idx) i = r() % a;
         return gather_rows(x, idx);
       }},
      {"segment_sum", [](Graph&, Var x, std::mt19937_64& r, std::size_t a, std::size_t) {
         std::vector<std::size_t> seg(a);
         for (auto& s : seg) s = r() % 3;
         return segment_sum(x, seg, 4);
       }},
      {"segment_mean", [](Graph&, Var x, std::mt19937_64& r, std::size_t a, std::size_t) {
         std::vector<std::size_t> seg(a);
         for (auto& s : seg) s = r() % 3;
         return segment_mean(x, seg, 4);
       }},
      {"rowwise_matvec filters", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t b) {
         const std::size_t out = 1 + r() % 3;
         Var f = concat_cols(std::vector<Var>(out, x));
         return rowwise_matvec(f, g.constant(random_tensor(a, b, r)), out);
       }},
      {"rowwise_matvec inputs", [](Graph& g, Var x, std::mt19937_64& r, std::size_t a, std::size_t b) {
         const std::size_t out = 1 + r() % 3;
         return rowwise_matvec(g.constant(random_tensor(a, out * b, r)), x, out);
       }},
  };
  for (const auto& [name, op] : ops) {
    INFO(name);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 shape_rng(seed);
      const std::size_t rows = 1 + shape_rng() % 8, cols = 1 + shape_rng() % 8;
      const Tensor point = random_tensor(rows, cols, shape_rng, -2.0, 2.0);
      const std::uint64_t op_seed = shape_rng();
      auto f = [&](Graph& g, Var x) {
        std::mt19937_64 r(op_seed);  // identical constants for every evaluation
        return readout(g, op(g, x, r, rows, cols), r);
      };
      worst = std::max(worst, gradient_check(f, point, 1e-6));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("softmax rows are on the open simplex") {
  std::mt19937_64 rng(3);
  Graph g;
  const Tensor s = softmax_rows(g.constant(random_tensor(20, 5, rng, -30, 30))).value();
  for (std::size_t r = 0; r < 20; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(s(r, c) > 0.0);
      CHECK(s(r, c) < 1.0);
      total += s(r, c);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("mlp examples") {
  std::mt19937_64 rng(0);
  SUBCASE("zero weights with relu give zero output") {
    ParameterStore store;
    Mlp mlp(store, "m", {{3, 4, 2}, {Activation::relu, Activation::relu}, false}, rng);
    for (auto& e : store.entries()) e.value.fill(0.0);
    Graph g;
    const Tensor y = mlp.apply(store, g, g.constant(random_tensor(5, 3, rng))).value();
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("identity single layer leaves x unchanged") {
    ParameterStore store;
    Mlp mlp(store, "m", {{3, 3}, {Activation::identity}, false}, rng);
    store.value(mlp.layers()[0].weight()) = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    store.value(mlp.layers()[0].bias()).fill(0.0);
    Graph g;
    const Tensor x = random_tensor(4, 3, rng);
    CHECK(mlp.apply(store, g, g.constant(x)).value() == x);
  }
  SUBCASE("two-layer net matches hand-rolled arithmetic") {
    std::mt19937_64 init(0);
    ParameterStore store;
    Mlp mlp(store, "m", {{3, 4, 2}, {Activation::elu, Activation::tanh}, false}, init);
    const Tensor x = random_tensor(2, 3, rng);
    const Tensor& w0 = store.value(mlp.layers()[0].weight());
    const Tensor& b0 = store.value(mlp.layers()[0].bias());
    const Tensor& w1 = store.value(mlp.layers()[1].weight());
    const Tensor& b1 = store.value(mlp.layers()[1].bias());
    Graph g;
    const Tensor y = mlp.apply(store, g, g.constant(x)).value();
    for (std::size_t r = 0; r < 2; ++r) {
      double hidden[4];
      for (std::size_t j = 0; j < 4; ++j) {
        double a = b0[j];
        for (std::size_t i = 0; i < 3; ++i) a += x(r, i) * w0(i, j);
        hidden[j] = a > 0 ? a : std::expm1(a);
      }
      for (std::size_t k = 0; k < 2; ++k) {
        double a = b1[k];
        for (std::size_t j = 0; j < 4; ++j) a += hidden[j] * w1(j, k);
        CHECK(std::abs(y(r, k) - std::tanh(a)) < 1e-14);
      }
    }
  }
  SUBCASE("training-mode batch norm rejects a single row") {
    ParameterStore store;
    Mlp mlp(store, "m", {{3, 2}, {Activation::elu}, true}, rng);
    Graph g(true);
    CHECK_THROWS_AS(mlp.apply(store, g, g.constant(random_tensor(1, 3, rng))), ShapeError);
  }
  SUBCASE("input width mismatch throws") {
    ParameterStore store;
    Mlp mlp(store, "m", {{3, 2}, {Activation::elu}, false}, rng);
    Graph g;
    CHECK_THROWS_AS(mlp.apply(store, g, g.constant(random_tensor(2, 4, rng))), ShapeError);
  }
}

TEST_CASE("inference batch norm is a fixed affine map") {
  std::mt19937_64 rng(5);
  ParameterStore store;
  BatchNorm bn(store, "bn", 3);
  store.value(bn.gamma()) = random_tensor(1, 3, rng).reshaped({3});
  store.value(bn.beta()) = random_tensor(1, 3, rng).reshaped({3});
  store.value(bn.running_mean()) = random_tensor(1, 3, rng).reshaped({3});
  store.value(bn.running_var()) = random_tensor(1, 3, rng, 0.5, 2.0).reshaped({3});
  const Tensor x = random_tensor(4, 3, rng);
  Graph g;
  const Tensor once = bn.apply(store, g, g.constant(x)).value();
  const Tensor twice = bn.apply(store, g, g.constant(once)).value();
  for (std::size_t j = 0; j < 3; ++j) {
    const double a = store.value(bn.gamma())[j] / std::sqrt(store.value(bn.running_var())[j] + BatchNorm::kEpsilon);
    const double b = store.value(bn.beta())[j] - a * store.value(bn.running_mean())[j];
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(std::abs(once(r, j) - (a * x(r, j) + b)) < 1e-14);
      CHECK(std::abs(twice(r, j) - (a * (a * x(r, j) + b) + b)) < 1e-13);
    }
  }
}

TEST_CASE("lstm and gru examples") {
  std::mt19937_64 rng(0);
  const std::size_t in = 3, H = 4, rows = 2;
  SUBCASE("zero parameters and zero state give zero output") {
    ParameterStore store;
    LstmCell lstm(store, "lstm", in, H, rng);
    GruCell gru(store, "gru", in, H, rng);
    for (auto& e : store.entries()) e.value.fill(0.0);
    Graph g;
    Var x = g.constant(random_tensor(rows, in, rng));
    const LstmState s = lstm.step(store, g, x, lstm.zero_state(g, rows));
    for (double v : s.h.value().data()) CHECK(v == 0.0);
    // Zero GRU parameters give h' = 0.5 * n + 0.5 * h with n = 0.
    const Tensor h = gru.step(store, g, x, g.constant(Tensor::matrix(rows, H))).value();
    for (double v : h.data()) CHECK(v == 0.0);
  }
  SUBCASE("a saturated forget gate keeps the cell") {
    ParameterStore store;
    LstmCell lstm(store, "lstm", in, H, rng);
    for (auto& e : store.entries()) e.value.fill(0.0);
    Tensor& b = store.value(lstm.bias());
    for (std::size_t k = 0; k < H; ++k) {
      b[H + k] = 50.0;    // forget gate open
      b[k] = -50.0;       // input gate closed
    }
    Graph g;
    const Tensor c0 = random_tensor(rows, H, rng);
    const LstmState s = lstm.step(store, g, g.constant(random_tensor(rows, in, rng)),
                                  {g.constant(Tensor::matrix(rows, H)), g.constant(c0)});
    CHECK(max_abs_diff(s.c.value(), c0) < 1e-12);
  }
  SUBCASE("seed-0 cells match the gate formulas") {
    std::mt19937_64 init(0);
    ParameterStore store;
    LstmCell lstm(store, "lstm", in, H, init);
    GruCell gru(store, "gru", in, H, init);
    const Tensor x = random_tensor(rows, in, rng), h0 = random_tensor(rows, H, rng), c0 = random_tensor(rows, H, rng);
    Graph g;
    const LstmState s = lstm.step(store, g, g.constant(x), {g.constant(h0), g.constant(c0)});
    const Tensor hg = gru.step(store, g, g.constant(x), g.constant(h0)).value();
    const Tensor &wx = store.value(lstm.input_weight()), &wh = store.value(lstm.hidden_weight()),
                 &bb = store.value(lstm.bias());
    const Tensor &gx = store.value(gru.input_weight()), &gh = store.value(gru.hidden_weight()),
                 &bx = store.value(gru.input_bias()), &bh = store.value(gru.hidden_bias());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < H; ++k) {
        auto lin = [&](const Tensor& W, const Tensor& U, std::size_t col, const Tensor& input) {
          double a = 0.0;
          for (std::size_t i = 0; i < in; ++i) a += input(r, i) * W(i, col);
          for (std::size_t j = 0; j < H; ++j) a += h0(r, j) * U(j, col);
          return a;
        };
        const double ig = sigmoid_ref(lin(wx, wh, k, x) + bb[k]);
        const double fg = sigmoid_ref(lin(wx, wh, H + k, x) + bb[H + k]);
        const double cg = std::tanh(lin(wx, wh, 2 * H + k, x) + bb[2 * H + k]);
        const double og = sigmoid_ref(lin(wx, wh, 3 * H + k, x) + bb[3 * H + k]);
        const double c = fg * c0(r, k) + ig * cg;
        CHECK(std::abs(s.c.value()(r, k) - c) < 1e-12);
        CHECK(std::abs(s.h.value()(r, k) - og * std::tanh(c)) < 1e-12);

        auto part = [&](const Tensor& W, std::size_t col, const Tensor& input, std::size_t width) {
          double a = 0.0;
          for (std::size_t i = 0; i < width; ++i) a += input(r, i) * W(i, col);
          return a;
        };
        const double rg = sigmoid_ref(part(gx, k, x, in) + bx[k] + part(gh, k, h0, H) + bh[k]);
        const double zg = sigmoid_ref(part(gx, H + k, x, in) + bx[H + k] + part(gh, H + k, h0, H) + bh[H + k]);
        const double ng = std::tanh(part(gx, 2 * H + k, x, in) + bx[2 * H + k] +
                                    rg * (part(gh, 2 * H + k, h0, H) + bh[2 * H + k]));
        CHECK(std::abs(hg(r, k) - ((1 - zg) * ng + zg * h0(r, k))) < 1e-12);
      }
  }
  SUBCASE("gru output norm passes gradient_check") {
    std::mt19937_64 init(4);
    ParameterStore store;
    GruCell gru(store, "gru", in, H, init);
    const Tensor h0 = random_tensor(rows, H, rng);
    auto f = [&](Graph& g, Var x) { return sum(square(gru.step(store, g, x, g.constant(h0)))); };
    CHECK(gradient_check(f, random_tensor(rows, in, rng), 1e-6) < 1e-4);
    const Tensor x1 = random_tensor(rows, in, rng);
    auto loss = [&](Graph& g) { return sum(square(gru.step(store, g, g.constant(x1), g.constant(h0)))); };
    CHECK(gradient_check_parameters(loss, store, 1e-6) < 1e-4);
  }
}

TEST_CASE("forward evaluation and gradients are deterministic") {
  auto run = [] {
    std::mt19937_64 init(2), data(3);
    ParameterStore store;
    Mlp mlp(store, "m", {{4, 8, 3}, {Activation::elu, Activation::identity}, true}, init);
    Graph g(true);
    Var y = sum(square(mlp.apply(store, g, g.constant(random_tensor(6, 4, data)))));
    GradientMap grads = evaluate_with_gradients(g, y);
    return std::make_pair(y.value(), grads);
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("adam with zero learning rate leaves parameters unchanged") {
  std::mt19937_64 rng(1);
  ParameterStore store;
  Mlp mlp(store, "m", {{2, 3, 1}, {Activation::tanh, Activation::identity}, false}, rng);
  const auto before = store.entries();
  Adam adam(store, {0.0});
  for (int step = 0; step < 3; ++step) {
    store.zero_grad();
    Graph g(true);
    Var y = sum(square(mlp.apply(store, g, g.constant(random_tensor(4, 2, rng)))));
    g.backward(y);
    g.accumulate_into_store();
    adam.step(store);
  }
  for (std::size_t e = 0; e < store.size(); ++e) CHECK(store.entries()[e].value == before[e].value);
}

TEST_CASE("checkpoint round trip and corruption") {
  TempDir dir("ckpt");
  std::mt19937_64 rng(7);
  ParameterStore store;
  Mlp mlp(store, "m", {{3, 5, 2}, {Activation::elu, Activation::identity}, true}, rng);
  const nlohmann::json meta = {{"note", "unit"}};
  const auto path = dir.path / "model.ckpt";
  write_checkpoint(path, store, meta);

  const Checkpoint back = read_checkpoint(path);
  CHECK(back.meta == meta);
  REQUIRE(back.params.size() == store.size());
  for (std::size_t e = 0; e < store.size(); ++e) {
    CHECK(back.params.entries()[e].name == store.entries()[e].name);
    CHECK(back.params.entries()[e].value == store.entries()[e].value);
    CHECK(back.params.entries()[e].trainable == store.entries()[e].trainable);
  }

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  SUBCASE("flipped payload byte") {
    std::string b = bytes;
    b[b.size() - 3] ^= 0x10;
    write(b);
    CHECK_THROWS_AS(read_checkpoint(path), FormatError);
  }
  SUBCASE("truncated payload") {
    write(bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(read_checkpoint(path), FormatError);
  }
  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    write(b);
    CHECK_THROWS_AS(read_checkpoint(path), FormatError);
  }
  SUBCASE("garbled header") {
    std::string b = bytes;
    b[20] = '{';
    b[21] = '{';
    write(b);
    CHECK_THROWS_AS(read_checkpoint(path), FormatError);
  }
  SUBCASE("loading into a mismatched store fails") {
    ParameterStore other;
    std::mt19937_64 r2(1);
    Mlp small(other, "m", {{3, 4, 2}, {Activation::elu, Activation::identity}, true}, r2);
    CHECK_THROWS(load_parameters(other, back.params));
  }
}
