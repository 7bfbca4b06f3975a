// SPDX-License-Identifier: Apache-2.0
#include "locs/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "locs/checkpoint.hpp"

namespace locs {

DecoderKind decoder_from_string(const std::string& s) {
  if (s == "markovian") return DecoderKind::markovian;
  if (s == "recurrent") return DecoderKind::recurrent;
  throw std::invalid_argument("unknown decoder kind: " + s);
}

std::string to_string(DecoderKind d) { return d == DecoderKind::markovian ? "markovian" : "recurrent"; }

FilterKind filter_from_string(const std::string& s) {
  if (s == "anisotropic") return FilterKind::anisotropic;
  if (s == "isotropic") return FilterKind::isotropic;
  throw std::invalid_argument("unknown filter kind: " + s);
}

std::string to_string(FilterKind f) { return f == FilterKind::anisotropic ? "anisotropic" : "isotropic"; }

OrientationSource orientation_from_string(const std::string& s) {
  if (s == "velocity") return OrientationSource::velocity;
  if (s == "intrinsic") return OrientationSource::intrinsic;
  throw std::invalid_argument("unknown orientation source: " + s);
}

std::string to_string(OrientationSource o) {
  return o == OrientationSource::velocity ? "velocity" : "intrinsic";
}

void ModelConfig::validate() const {
  if (dim != 2 && dim != 3) throw std::invalid_argument("model dimension must be 2 or 3");
  if (edge_types < 2) throw std::invalid_argument("need at least 2 edge types");
  if (!(sigma2 > 0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(temperature > 0)) throw std::invalid_argument("Gumbel temperature must be positive");
  if (hidden == 0 || lstm_hidden == 0 || head_hidden == 0 || filter_hidden == 0) {
    throw std::invalid_argument("hidden sizes must be positive");
  }
  if (no_edge_prior && !(*no_edge_prior > 0 && *no_edge_prior < 1)) {
    throw std::invalid_argument("no_edge_prior must lie in (0, 1)");
  }
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j = {{"dim", dim},
                      {"edge_types", edge_types},
                      {"hidden", hidden},
                      {"lstm_hidden", lstm_hidden},
                      {"head_hidden", head_hidden},
                      {"filter_hidden", filter_hidden},
                      {"decoder", to_string(decoder)},
                      {"frame", to_string(frame)},
                      {"filters", to_string(filters)},
                      {"decoder_anisotropic", decoder_anisotropic},
                      {"no_edge_hardcoded", no_edge_hardcoded},
                      {"sigma2", sigma2},
                      {"temperature", temperature},
                      {"orientation", to_string(orientation)},
                      {"init_seed", init_seed}};
  j["no_edge_prior"] = no_edge_prior ? nlohmann::json(*no_edge_prior) : nlohmann::json(nullptr);
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("dim", c.dim);
  get("edge_types", c.edge_types);
  get("hidden", c.hidden);
  get("lstm_hidden", c.lstm_hidden);
  get("head_hidden", c.head_hidden);
  get("filter_hidden", c.filter_hidden);
  if (j.contains("decoder")) c.decoder = decoder_from_string(j.at("decoder").get<std::string>());
  if (j.contains("frame")) c.frame = frame_from_string(j.at("frame").get<std::string>());
  if (j.contains("filters")) c.filters = filter_from_string(j.at("filters").get<std::string>());
  get("decoder_anisotropic", c.decoder_anisotropic);
  get("no_edge_hardcoded", c.no_edge_hardcoded);
  get("sigma2", c.sigma2);
  get("temperature", c.temperature);
  if (j.contains("no_edge_prior") && !j.at("no_edge_prior").is_null()) {
    c.no_edge_prior = j.at("no_edge_prior").get<double>();
  }
  if (j.contains("orientation")) {
    c.orientation = orientation_from_string(j.at("orientation").get<std::string>());
  }
  get("init_seed", c.init_seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> directed_pairs(std::size_t nodes) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(nodes * (nodes - 1));
  for (std::size_t j = 0; j < nodes; ++j)
    for (std::size_t i = 0; i < nodes; ++i)
      if (i != j) out.emplace_back(j, i);
  return out;
}

namespace {

void fill_pair_indices(FrameBatch& b) {
  const auto pairs = directed_pairs(b.nodes);
  const std::size_t P = pairs.size(), rows = b.times * b.scenes;
  b.sender.resize(rows * P);
  b.receiver.resize(rows * P);
  for (std::size_t f = 0; f < rows; ++f)
    for (std::size_t p = 0; p < P; ++p) {
      b.sender[f * P + p] = f * b.nodes + pairs[p].first;
      b.receiver[f * P + p] = f * b.nodes + pairs[p].second;
    }
}

Tensor slice_tensor_rows(const Tensor& t, std::size_t first, std::size_t count) {
  const std::size_t C = t.cols();
  Tensor out = Tensor::matrix(count, C);
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(first * C), count * C, out.data().begin());
  return out;
}

}  // namespace

FrameBatch FrameBatch::slice_times(std::size_t first, std::size_t count) const {
  if (first + count > times) throw std::out_of_range("FrameBatch::slice_times out of range");
  FrameBatch b;
  b.dim = dim;
  b.frame = frame;
  b.times = count;
  b.scenes = scenes;
  b.nodes = nodes;
  const std::size_t e = edge_rows_per_time(), n = node_rows_per_time();
  b.pair_features = slice_tensor_rows(pair_features, first * e, count * e);
  b.filter_inputs = slice_tensor_rows(filter_inputs, first * e, count * e);
  b.self_features = slice_tensor_rows(self_features, first * n, count * n);
  b.states = slice_tensor_rows(states, first * n, count * n);
  b.output_rotation = slice_tensor_rows(output_rotation, first * n, count * n);
  fill_pair_indices(b);
  return b;
}

FrameBatch build_frame_batch(std::span<const SceneStates> scenes, std::size_t t0, std::size_t count,
                             FrameKind frame) {
  if (scenes.empty()) throw ShapeError("build_frame_batch: no scenes");
  const int D = scenes[0].dim;
  const std::size_t N = scenes[0].nodes;
  for (const auto& s : scenes) {
    if (s.dim != D || s.nodes != N) throw ShapeError("build_frame_batch: scenes disagree on D or N");
    if (t0 + count > s.steps) throw ShapeError("build_frame_batch: timestep range exceeds scene");
  }
  if (N < 2) throw ShapeError("build_frame_batch: need at least two nodes");

  FrameBatch b;
  b.dim = D;
  b.frame = frame;
  b.times = count;
  b.scenes = scenes.size();
  b.nodes = N;
  const std::size_t A = D == 2 ? 1 : 3, W = 2 * D + A, PW = 2 * W + D, FW = D + A, S = 2 * D;
  const auto pairs = directed_pairs(N);
  const std::size_t P = pairs.size();
  b.pair_features = Tensor::matrix(b.edge_rows(), PW);
  b.filter_inputs = Tensor::matrix(b.edge_rows(), FW);
  b.self_features = Tensor::matrix(b.node_rows(), W);
  b.states = Tensor::matrix(b.node_rows(), S);
  b.output_rotation = Tensor::matrix(b.node_rows(), S * S);

  for (std::size_t t = 0; t < count; ++t)
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const SceneStates& sc = scenes[s];
      const CanonicalPairs c = canonicalize(sc, t0 + t, frame);
      const std::size_t f = t * scenes.size() + s;
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t row = f * N + n;
        c.state_features(n, n, &b.self_features(row, 0));
        for (int d = 0; d < D; ++d) {
          b.states(row, d) = sc.position(t0 + t, n)[d];
          b.states(row, D + d) = sc.velocity(t0 + t, n)[d];
        }
        const double* q = c.frame_rotation.data() + n * D * D;
        double* r = &b.output_rotation(row, 0);
        for (int blk = 0; blk < 2; ++blk)
          for (int a = 0; a < D; ++a)
            for (int k = 0; k < D; ++k) r[(blk * D + a) * S + blk * D + k] = q[a * D + k];
      }
      for (std::size_t p = 0; p < P; ++p) {
        const auto [j, i] = pairs[p];
        const std::size_t row = f * P + p;
        double* x = &b.pair_features(row, 0);
        c.state_features(j, i, x);
        c.spherical_features(j, i, x + W);
        c.state_features(i, i, x + W + D);
        c.filter_inputs(j, i, &b.filter_inputs(row, 0));
      }
    }
  fill_pair_indices(b);
  return b;
}

// ---------------------------------------------------------------------------

Tensor gumbel_noise(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  constexpr double eps = 1e-20;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor g = Tensor::matrix(rows, cols);
  for (double& v : g.data()) v = -std::log(-std::log(u(rng) + eps) + eps);
  return g;
}

Var gumbel_softmax_sample(Var logits, double temperature, const Tensor* noise) {
  if (!(temperature > 0)) throw std::invalid_argument("Gumbel temperature must be positive");
  Var x = logits;
  if (noise) {
    if (!noise->same_shape(logits.value())) throw ShapeError("Gumbel noise shape mismatch");
    x = add(x, logits.graph().constant(*noise));
  }
  return softmax_rows(scale(x, 1.0 / temperature));
}

Tensor gumbel_softmax_sample(const Tensor& logits, double temperature, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor noise = gumbel_noise(logits.rows(), logits.cols(), rng);
  Graph g;
  return gumbel_softmax_sample(g.constant(logits), temperature, &noise).value();
}

// ---------------------------------------------------------------------------

LocsModel::LocsModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.init_seed);
  const std::size_t H = config_.hidden, W = config_.state_width(), PW = config_.pair_width();
  const std::size_t FW = config_.filter_input_width(), FH = config_.filter_hidden;
  const std::size_t L = config_.lstm_hidden, HH = config_.head_hidden, K = config_.edge_types;
  const std::size_t S = 2 * static_cast<std::size_t>(config_.dim);
  using A = Activation;

  if (config_.filters == FilterKind::anisotropic) {
    enc_filter_ = Mlp(store_, "enc.filter", {{FW, FH, H * PW}, {A::elu, A::identity}, false}, rng);
  } else {
    enc_linear_ = Linear(store_, "enc.edge1", PW, H, rng, false);
  }
  enc_self_ = Linear(store_, "enc.self", W, H, rng);
  enc_node_ = Mlp(store_, "enc.node", {{H, H, H}, {A::elu, A::elu}, true}, rng);
  enc_edge_ = Mlp(store_, "enc.edge2", {{3 * H, H, H}, {A::elu, A::elu}, true}, rng);
  lstm_prior_ = LstmCell(store_, "enc.lstm_prior", H, L, rng);
  lstm_enc_ = LstmCell(store_, "enc.lstm_enc", H, L, rng);
  prior_head_ = Mlp(store_, "enc.prior_head", {{L, HH, HH, K}, {A::elu, A::elu, A::identity}, false}, rng);
  enc_head_ = Mlp(store_, "enc.post_head", {{2 * L, HH, HH, K}, {A::elu, A::elu, A::identity}, false}, rng);

  msg_.resize(K);
  for (std::size_t k = first_active_type(); k < K; ++k) {
    const std::string name = "dec.msg" + std::to_string(k);
    if (config_.decoder_anisotropic) {
      msg_[k] = Mlp(store_, name, {{FW, FH, H * PW}, {A::tanh, A::identity}, false}, rng);
    } else {
      msg_[k] = Mlp(store_, name, {{PW, H, H}, {A::relu, A::relu}, false}, rng);
    }
  }
  dec_self_ = Linear(store_, "dec.self", W, H, rng);
  if (config_.decoder == DecoderKind::recurrent) {
    hidden_msg_.resize(K);
    for (std::size_t k = first_active_type(); k < K; ++k) {
      hidden_msg_[k] = Mlp(store_, "dec.hidden_msg" + std::to_string(k),
                           {{2 * H, H, H}, {A::tanh, A::tanh}, false}, rng);
    }
    gru_ = GruCell(store_, "dec.gru", 2 * H, H, rng);
  }
  output_head_ = Mlp(store_, "dec.out", {{H, H, H, S}, {A::relu, A::relu, A::identity}, false}, rng);
}

Var LocsModel::encoder_filters(Graph& g, Var filter_inputs) {
  if (config_.filters != FilterKind::anisotropic) {
    throw std::logic_error("encoder_filters: model uses isotropic filters");
  }
  return enc_filter_.apply(store_, g, filter_inputs);
}

Var LocsModel::decoder_filters(Graph& g, std::size_t k, Var filter_inputs) {
  if (!config_.decoder_anisotropic) throw std::logic_error("decoder_filters: decoder is isotropic");
  if (k < first_active_type() || k >= config_.edge_types) {
    throw std::out_of_range("decoder_filters: edge type has no message network");
  }
  return msg_[k].apply(store_, g, filter_inputs);
}

Var LocsModel::embed(Graph& g, const FrameBatch& batch) {
  if (batch.dim != config_.dim) throw ShapeError("embed: batch dimension differs from the model");
  Var x = g.constant(batch.pair_features);
  Var h1;
  if (config_.filters == FilterKind::anisotropic) {
    Var f = encoder_filters(g, g.constant(batch.filter_inputs));
    h1 = rowwise_matvec(f, x, config_.hidden);
  } else {
    h1 = enc_linear_.apply(store_, g, x);
  }
  Var agg = segment_mean(h1, batch.receiver, batch.node_rows());
  Var self = enc_self_.apply(store_, g, g.constant(batch.self_features));
  Var node = enc_node_.apply(store_, g, add(self, agg));
  Var h_recv = gather_rows(node, batch.receiver);
  Var h_send = gather_rows(node, batch.sender);
  return enc_edge_.apply(store_, g, concat_cols({h_recv, h1, h_send}));
}

LstmState LocsModel::zero_prior_state(Graph& g, std::size_t rows) const {
  return lstm_prior_.zero_state(g, rows);
}

Var LocsModel::prior_step(Graph& g, Var embeddings, LstmState& state) {
  state = lstm_prior_.step(store_, g, embeddings, state);
  return prior_head_.apply(store_, g, state.h);
}

EdgeBeliefs LocsModel::encode(Graph& g, const FrameBatch& batch) {
  Var h2 = embed(g, batch);
  const std::size_t E = batch.edge_rows_per_time(), T = batch.times;
  std::vector<Var> fwd(T), bwd(T);
  LstmState sp = lstm_prior_.zero_state(g, E);
  for (std::size_t t = 0; t < T; ++t) {
    sp = lstm_prior_.step(store_, g, slice_rows(h2, t * E, E), sp);
    fwd[t] = sp.h;
  }
  LstmState se = lstm_enc_.zero_state(g, E);
  for (std::size_t t = T; t-- > 0;) {
    se = lstm_enc_.step(store_, g, slice_rows(h2, t * E, E), se);
    bwd[t] = se.h;
  }
  Var hp = concat_rows(fwd);
  Var he = concat_rows(bwd);
  EdgeBeliefs out;
  out.prior_logits = prior_head_.apply(store_, g, hp);
  out.posterior_logits = enc_head_.apply(store_, g, concat_cols({hp, he}));
  out.prior_state = sp;
  return out;
}

Var LocsModel::zero_decoder_hidden(Graph& g, std::size_t rows) const {
  return g.constant(Tensor::matrix(rows, config_.hidden));
}

Var LocsModel::messages(Graph& g, const FrameBatch& batch, Var z) {
  Var x = g.constant(batch.pair_features);
  Var fin;
  if (config_.decoder_anisotropic) fin = g.constant(batch.filter_inputs);
  Var total;
  for (std::size_t k = first_active_type(); k < config_.edge_types; ++k) {
    Var m = config_.decoder_anisotropic
                ? rowwise_matvec(msg_[k].apply(store_, g, fin), x, config_.hidden)
                : msg_[k].apply(store_, g, x);
    m = mul_col(m, slice_cols(z, k, 1));
    total = total.valid() ? add(total, m) : m;
  }
  return total;
}

DecodeOutput LocsModel::decode(Graph& g, const FrameBatch& batch, Var z, Var hidden) {
  if (batch.dim != config_.dim) throw ShapeError("decode: batch dimension differs from the model");
  if (z.rows() != batch.edge_rows() || z.cols() != config_.edge_types) {
    throw ShapeError("decode: edge weights " + to_string(z.shape()) + " do not match " +
                     std::to_string(batch.edge_rows()) + " pairs x " +
                     std::to_string(config_.edge_types) + " types");
  }
  const std::size_t R = batch.node_rows(), H = config_.hidden;
  Var msg = messages(g, batch, z);
  Var m = add(dec_self_.apply(store_, g, g.constant(batch.self_features)),
              segment_mean(msg, batch.receiver, R));

  DecodeOutput out;
  Var features = m;
  if (config_.decoder == DecoderKind::recurrent) {
    if (batch.times != 1) throw ShapeError("recurrent decode takes one timestep at a time");
    if (!hidden.valid()) hidden = zero_decoder_hidden(g, R);
    if (hidden.rows() != R || hidden.cols() != H) throw ShapeError("decode: hidden state shape");
    Var hs = gather_rows(hidden, batch.sender);
    Var hr = gather_rows(hidden, batch.receiver);
    Var pair_in = concat_cols({hs, hr});
    Var ph;
    for (std::size_t k = first_active_type(); k < config_.edge_types; ++k) {
      Var v = mul_col(hidden_msg_[k].apply(store_, g, pair_in), slice_cols(z, k, 1));
      ph = ph.valid() ? add(ph, v) : v;
    }
    Var n = segment_mean(ph, batch.receiver, R);
    out.hidden = gru_.step(store_, g, concat_cols({n, m}), hidden);
    features = out.hidden;
  } else if (hidden.valid()) {
    throw std::invalid_argument("decode: the Markovian decoder takes no hidden state");
  }
  Var delta = output_head_.apply(store_, g, features);
  const std::size_t S = 2 * static_cast<std::size_t>(config_.dim);
  out.mean = add(g.constant(batch.states), rowwise_matvec(g.constant(batch.output_rotation), delta, S));
  return out;
}

// ---------------------------------------------------------------------------

void save_model(const std::filesystem::path& path, const LocsModel& model, nlohmann::json meta) {
  meta["model"] = model.config().to_json();
  write_checkpoint(path, model.params(), meta);
}

std::pair<LocsModel, nlohmann::json> load_model(const std::filesystem::path& path) {
  Checkpoint ck = read_checkpoint(path);
  if (!ck.meta.contains("model")) throw FormatError(path.string() + ": checkpoint has no model config");
  LocsModel model(ModelConfig::from_json(ck.meta.at("model")));
  load_parameters(model.params(), ck.params);
  return {std::move(model), std::move(ck.meta)};
}

// ---------------------------------------------------------------------------

SceneStates scene_from_trajectory(const Trajectory& traj) {
  return SceneStates::from_trajectory(traj.dim, traj.steps, traj.nodes, traj.data);
}

namespace {

/// One-frame scene with the given states and orientations.
SceneStates single_frame(const SceneStates& src, std::size_t t) {
  SceneStates s;
  s.dim = src.dim;
  s.steps = 1;
  s.nodes = src.nodes;
  s.source = src.source;
  const std::size_t D = src.dim, A = src.angle_dim(), N = src.nodes;
  s.positions.assign(src.positions.begin() + t * N * D, src.positions.begin() + (t + 1) * N * D);
  s.velocities.assign(src.velocities.begin() + t * N * D, src.velocities.begin() + (t + 1) * N * D);
  s.orientations.assign(src.orientations.begin() + t * N * A,
                        src.orientations.begin() + (t + 1) * N * A);
  return s;
}

Tensor one_hot_argmax(const Tensor& logits) {
  Tensor out(logits.shape(), 0.0);
  const std::size_t C = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out(r, best) = 1.0;
  }
  return out;
}

}  // namespace

RolloutResult rollout(LocsModel& model, std::span<const SceneStates> scenes, const RolloutOptions& opts) {
  if (scenes.empty()) throw std::invalid_argument("rollout: no scenes");
  if (opts.observed_len == 0) throw std::invalid_argument("rollout: observed_len must be positive");
  const ModelConfig& cfg = model.config();
  const std::size_t B = scenes.size(), N = scenes[0].nodes, D = cfg.dim, S = 2 * D;
  const std::size_t K = cfg.edge_types;
  for (const auto& s : scenes) {
    if (s.steps < opts.observed_len) throw std::invalid_argument("rollout: scene shorter than observed_len");
    if (static_cast<std::size_t>(s.dim) != D || s.nodes != N) {
      throw ShapeError("rollout: scenes disagree with the model on D or N");
    }
  }

  RolloutResult res;
  for (std::size_t b = 0; b < B; ++b) {
    res.predictions.emplace_back(cfg.dim, opts.horizon, N);
    res.burn_in.emplace_back(cfg.dim, opts.observed_len - 1, N);
  }
  if (!opts.scene_seeds.empty() && opts.scene_seeds.size() != B) {
    throw std::invalid_argument("rollout: need one seed per scene");
  }
  std::vector<std::mt19937_64> rngs;
  if (opts.scene_seeds.empty()) {
    rngs.emplace_back(opts.seed);
  } else {
    for (std::uint64_t s : opts.scene_seeds) rngs.emplace_back(s);
  }

  std::vector<SceneStates> current;
  for (const auto& s : scenes) current.push_back(single_frame(s, 0));

  const std::size_t E = B * N * (N - 1);
  Tensor lstm_h = Tensor::matrix(E, cfg.lstm_hidden), lstm_c = Tensor::matrix(E, cfg.lstm_hidden);
  Tensor dec_h = Tensor::matrix(B * N, cfg.hidden);
  const std::size_t last = opts.observed_len + opts.horizon - 1;

  for (std::size_t t = 0; t < last; ++t) {
    Graph g(false);
    const FrameBatch fb = build_frame_batch(current, 0, 1, cfg.frame);
    LstmState st{g.constant(lstm_h), g.constant(lstm_c)};
    Var logits = model.prior_step(g, model.embed(g, fb), st);
    lstm_h = st.h.value();
    lstm_c = st.c.value();

    Tensor z;
    if (opts.sample_edges) {
      Tensor noise;
      if (rngs.size() == 1) {
        noise = gumbel_noise(E, K, rngs[0]);
      } else {
        noise = Tensor::matrix(E, K);
        const std::size_t per = E / B;
        for (std::size_t b = 0; b < B; ++b) {
          const Tensor part = gumbel_noise(per, K, rngs[b]);
          std::copy(part.data().begin(), part.data().end(),
                    noise.data().begin() + static_cast<std::ptrdiff_t>(b * per * K));
        }
      }
      z = gumbel_softmax_sample(logits, cfg.temperature, &noise).value();
    } else {
      z = one_hot_argmax(logits.value());
    }
    {
      const Tensor p = softmax_rows(logits).value();
      res.prior_probs.insert(res.prior_probs.end(), p.data().begin(), p.data().end());
    }

    Var hidden = cfg.decoder == DecoderKind::recurrent ? g.constant(dec_h) : Var();
    DecodeOutput out = model.decode(g, fb, g.constant(z), hidden);
    if (out.hidden.valid()) dec_h = out.hidden.value();
    const Tensor& mu = out.mean.value();

    const std::size_t next = t + 1;
    for (std::size_t b = 0; b < B; ++b) {
      Trajectory& dst = next < opts.observed_len ? res.burn_in[b] : res.predictions[b];
      const std::size_t frame = next < opts.observed_len ? next - 1 : next - opts.observed_len;
      for (std::size_t n = 0; n < N; ++n)
        std::copy_n(mu.data().begin() + static_cast<std::ptrdiff_t>((b * N + n) * S), S, dst.state(frame, n));

      if (next < opts.observed_len) {
        current[b] = single_frame(scenes[b], next);
      } else {
        SceneStates& c = current[b];
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t d = 0; d < D; ++d) {
            c.positions[n * D + d] = mu(b * N + n, d);
            c.velocities[n * D + d] = mu(b * N + n, D + d);
          }
        c.refresh_orientations();
      }
    }
  }
  return res;
}

}  // namespace locs
