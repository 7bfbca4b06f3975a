// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "locs/autodiff.hpp"
#include "locs/frames.hpp"
#include "locs/layers.hpp"
#include "locs/params.hpp"
#include "locs/trajectory.hpp"

namespace locs {

enum class DecoderKind { markovian, recurrent };
enum class FilterKind { anisotropic, isotropic };

DecoderKind decoder_from_string(const std::string& s);
std::string to_string(DecoderKind d);
FilterKind filter_from_string(const std::string& s);
std::string to_string(FilterKind f);
OrientationSource orientation_from_string(const std::string& s);
std::string to_string(OrientationSource o);

struct ModelConfig {
  int dim = 2;
  std::size_t edge_types = 2;
  std::size_t hidden = 256;         ///< edge/node embeddings, decoder MLPs, GRU
  std::size_t lstm_hidden = 64;
  std::size_t head_hidden = 128;    ///< f_prior / f_enc
  std::size_t filter_hidden = 256;  ///< filter-generating networks
  DecoderKind decoder = DecoderKind::markovian;
  FrameKind frame = FrameKind::roto_translated;
  FilterKind filters = FilterKind::anisotropic;  ///< encoder edge filters
  bool decoder_anisotropic = false;              ///< filter-generated decoder messages
  bool no_edge_hardcoded = true;
  double sigma2 = 1e-5;
  double temperature = 0.5;
  /// When set, adds KL(q || fixed prior with this mass on edge type 0).
  std::optional<double> no_edge_prior;
  OrientationSource orientation = OrientationSource::velocity;
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t angle_dim() const noexcept { return dim == 2 ? 1 : 3; }
  /// Width of v_{j|i} = [r, omega/pi, u].
  std::size_t state_width() const noexcept { return 2 * dim + angle_dim(); }
  /// Width of [v_{j|i}, s_{j,i}, v_{i|i}].
  std::size_t pair_width() const noexcept { return 2 * state_width() + dim; }
  /// Width of [s_{j,i}, omega_{j|i}/pi].
  std::size_t filter_input_width() const noexcept { return dim + angle_dim(); }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Ordered pairs (j, i), j != i, sender-major.
std::vector<std::pair<std::size_t, std::size_t>> directed_pairs(std::size_t nodes);

/// Canonicalized model inputs for `times` consecutive timesteps of `scenes`
/// scenes. Pair rows are ordered [t][scene][pair], node rows [t][scene][node].
struct FrameBatch {
  int dim = 2;
  FrameKind frame = FrameKind::roto_translated;
  std::size_t times = 0;
  std::size_t scenes = 0;
  std::size_t nodes = 0;
  Tensor pair_features;    ///< [rows_e, pair_width]
  Tensor filter_inputs;    ///< [rows_e, filter_input_width]
  Tensor self_features;    ///< [rows_n, state_width]
  Tensor states;           ///< [rows_n, 2D] global (p, u)
  Tensor output_rotation;  ///< [rows_n, (2D)^2] row-major Q_i (+) Q_i
  std::vector<std::size_t> sender;    ///< node row of j for every pair row
  std::vector<std::size_t> receiver;  ///< node row of i for every pair row

  std::size_t pairs() const noexcept { return nodes * (nodes - 1); }
  std::size_t edge_rows_per_time() const noexcept { return scenes * pairs(); }
  std::size_t node_rows_per_time() const noexcept { return scenes * nodes; }
  std::size_t edge_rows() const noexcept { return times * edge_rows_per_time(); }
  std::size_t node_rows() const noexcept { return times * node_rows_per_time(); }

  /// Timesteps [first, first + count).
  FrameBatch slice_times(std::size_t first, std::size_t count) const;
};

/// Builds inputs for timesteps [t0, t0 + count) of every scene; all scenes
/// must share dimension and node count.
FrameBatch build_frame_batch(std::span<const SceneStates> scenes, std::size_t t0, std::size_t count,
                             FrameKind frame);

/// Standard Gumbel(0, 1) noise.
Tensor gumbel_noise(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
/// softmax((logits + noise) / temperature) per row; a null noise pointer
/// gives the plain tempered softmax.
Var gumbel_softmax_sample(Var logits, double temperature, const Tensor* noise);
Tensor gumbel_softmax_sample(const Tensor& logits, double temperature, std::uint64_t seed);

struct EdgeBeliefs {
  Var prior_logits;      ///< [T * B * P, K]
  Var posterior_logits;  ///< [T * B * P, K]
  LstmState prior_state; ///< forward LSTM after the last timestep
};

struct DecodeOutput {
  Var mean;    ///< [rows_n, 2D] predicted next states
  Var hidden;  ///< recurrent decoder state; invalid for the Markovian decoder
};

class LocsModel {
 public:
  explicit LocsModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& params() noexcept { return store_; }
  const ParameterStore& params() const noexcept { return store_; }

  /// Per-timestep pair embeddings h^(2), rows ordered like the batch pairs.
  Var embed(Graph& g, const FrameBatch& batch);
  /// Prior and posterior edge logits for every timestep of the batch.
  EdgeBeliefs encode(Graph& g, const FrameBatch& batch);
  /// One forward-LSTM step on embeddings of a single timestep.
  Var prior_step(Graph& g, Var embeddings, LstmState& state);
  LstmState zero_prior_state(Graph& g, std::size_t rows) const;

  /// Edge filters W(dp) flattened row-major to [rows_e, out * in].
  Var encoder_filters(Graph& g, Var filter_inputs);
  Var decoder_filters(Graph& g, std::size_t k, Var filter_inputs);

  /// Next-state means for every frame in the batch. `z` rows align with the
  /// batch pair rows. `hidden` is required iff the decoder is recurrent and
  /// the batch holds one timestep.
  DecodeOutput decode(Graph& g, const FrameBatch& batch, Var z, Var hidden = Var());
  Var zero_decoder_hidden(Graph& g, std::size_t rows) const;

  /// The output head's last linear layer (zeroing it makes mu = x).
  const Linear& output_layer() const { return output_head_.layers().back(); }

 private:
  Var messages(Graph& g, const FrameBatch& batch, Var z);
  std::size_t first_active_type() const noexcept { return config_.no_edge_hardcoded ? 1 : 0; }

  ModelConfig config_;
  ParameterStore store_;

  Mlp enc_filter_;       // anisotropic encoder filter net
  Linear enc_linear_;    // isotropic encoder filter
  Linear enc_self_;      // g_v1
  Mlp enc_node_;         // f_v1
  Mlp enc_edge_;         // f_e2
  LstmCell lstm_prior_;
  LstmCell lstm_enc_;
  Mlp prior_head_;
  Mlp enc_head_;

  std::vector<Mlp> msg_;         // f^k (or filter nets W^k when anisotropic)
  Linear dec_self_;              // g_v3
  std::vector<Mlp> hidden_msg_;  // g^k
  GruCell gru_;
  Mlp output_head_;              // f_v4
};

/// Checkpoint with the model config embedded under meta["model"].
void save_model(const std::filesystem::path& path, const LocsModel& model,
                nlohmann::json meta = nlohmann::json::object());
std::pair<LocsModel, nlohmann::json> load_model(const std::filesystem::path& path);

struct RolloutOptions {
  std::size_t observed_len = 25;
  std::size_t horizon = 25;
  std::uint64_t seed = 0;
  /// Optional per-scene noise seeds; when empty every scene draws from `seed`.
  std::vector<std::uint64_t> scene_seeds;
  bool sample_edges = true;  ///< Gumbel sample from the prior; false takes the argmax
};

struct RolloutResult {
  /// Per scene: frames observed_len .. observed_len + horizon - 1.
  std::vector<Trajectory> predictions;
  /// Per scene: teacher-forced one-step predictions of frames 1 .. observed_len - 1.
  std::vector<Trajectory> burn_in;
  /// Prior edge probabilities per step, [step][scene][pair][K] flattened.
  std::vector<double> prior_probs;
};

/// Teacher-forced burn-in over the observed prefix, then free rollout with
/// edges drawn from the prior. Intrinsic orientations are held at their last
/// observed value; velocity-derived ones follow the predicted velocities.
RolloutResult rollout(LocsModel& model, std::span<const SceneStates> scenes, const RolloutOptions& opts);

/// Scene states from a trajectory with velocity-derived orientations.
SceneStates scene_from_trajectory(const Trajectory& traj);

}  // namespace locs
