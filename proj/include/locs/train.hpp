// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "locs/loss.hpp"
#include "locs/model.hpp"
#include "locs/normalize.hpp"
#include "locs/simulate.hpp"

namespace locs {

struct TrainConfig {
  std::size_t epochs = 20;
  double lr = 5e-4;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  NormMode norm = NormMode::speed;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Raised when the loss stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossRecord {
  std::size_t epoch;
  std::size_t batch;
  double loss;
  double nll;
  double kl;
};

struct TrainResult {
  LocsModel model;
  NormSpec norm;
  std::vector<LossRecord> log;
  std::vector<double> epoch_loss;  ///< mean batch loss per epoch
  double seconds = 0.0;
};

/// Teacher-forced negative ELBO of one batch: posterior edges are sampled
/// with the given Gumbel noise ([T * B * P, K]; null for none) and every
/// decoder step sees ground-truth inputs. Averaged over the batch scenes.
ElboTerms batch_elbo(Graph& g, LocsModel& model, std::span<const SceneStates> scenes,
                     const Tensor* noise);

/// Normalized scene states for every scene of a bundle.
std::vector<SceneStates> bundle_scenes(const DatasetBundle& bundle, const NormSpec& norm);

using TrainObserver = std::function<void(const LossRecord&)>;

/// Fits normalization on `train`, then minimizes the batch ELBO with Adam.
TrainResult train_model(const DatasetBundle& train, const ModelConfig& model_cfg,
                        const TrainConfig& cfg, const TrainObserver& observer = {});

/// Reads a dataset directory, trains, writes the checkpoint (with model
/// config, normalization and training config embedded) and a CSV loss log.
TrainResult train_to_checkpoint(const std::filesystem::path& dataset, const ModelConfig& model_cfg,
                                const TrainConfig& cfg, const std::filesystem::path& checkpoint,
                                const std::filesystem::path& loss_log = {},
                                const TrainObserver& observer = {});

nlohmann::json checkpoint_meta(const TrainResult& result, const TrainConfig& cfg);

}  // namespace locs
