// SPDX-License-Identifier: Apache-2.0
#include "locs/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "locs/optim.hpp"

namespace locs {

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (batch == 0) throw std::invalid_argument("batch size must be positive");
  if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs}, {"lr", lr}, {"batch", batch}, {"seed", seed}, {"norm", to_string(norm)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.batch = j.value("batch", c.batch);
  c.seed = j.value("seed", c.seed);
  if (j.contains("norm")) c.norm = norm_mode_from_string(j.at("norm").get<std::string>());
  c.validate();
  return c;
}

ElboTerms batch_elbo(Graph& g, LocsModel& model, std::span<const SceneStates> scenes,
                     const Tensor* noise) {
  const ModelConfig& cfg = model.config();
  const std::size_t T = scenes.front().steps;
  if (T < 2) throw ShapeError("batch_elbo: scenes need at least two timesteps");
  for (const auto& s : scenes)
    if (s.steps != T) throw ShapeError("batch_elbo: scenes in a batch must share their length");

  const FrameBatch fb = build_frame_batch(scenes, 0, T, cfg.frame);
  EdgeBeliefs beliefs = model.encode(g, fb);
  Var z = gumbel_softmax_sample(beliefs.posterior_logits, cfg.temperature, noise);
  const std::size_t E = fb.edge_rows_per_time();

  Var mean;
  if (cfg.decoder == DecoderKind::markovian) {
    mean = model.decode(g, fb.slice_times(0, T - 1), slice_rows(z, 0, (T - 1) * E)).mean;
  } else {
    std::vector<Var> steps;
    Var hidden = model.zero_decoder_hidden(g, fb.node_rows_per_time());
    for (std::size_t t = 0; t + 1 < T; ++t) {
      DecodeOutput out = model.decode(g, fb.slice_times(t, 1), slice_rows(z, t * E, E), hidden);
      hidden = out.hidden;
      steps.push_back(out.mean);
    }
    mean = concat_rows(steps);
  }
  const Tensor target = fb.slice_times(1, T - 1).states;
  return elbo_loss(mean, target, beliefs.posterior_logits, beliefs.prior_logits, cfg.sigma2,
                   static_cast<double>(scenes.size()), cfg.no_edge_prior);
}

std::vector<SceneStates> bundle_scenes(const DatasetBundle& bundle, const NormSpec& norm) {
  std::vector<SceneStates> out;
  out.reserve(bundle.meta.scenes);
  for (std::size_t s = 0; s < bundle.meta.scenes; ++s) {
    out.push_back(scene_from_trajectory(normalize(bundle.scene(s), norm)));
  }
  return out;
}

TrainResult train_model(const DatasetBundle& train, const ModelConfig& model_cfg, const TrainConfig& cfg,
                        const TrainObserver& observer) {
  cfg.validate();
  if (train.meta.dim != model_cfg.dim) throw std::invalid_argument("dataset and model dimensions differ");
  if (train.meta.scenes == 0) throw std::invalid_argument("training set is empty");
  const auto start = std::chrono::steady_clock::now();

  TrainResult res{LocsModel(model_cfg), fit_normalization(train, cfg.norm), {}, {}, 0.0};
  const std::vector<SceneStates> scenes = bundle_scenes(train, res.norm);
  LocsModel& model = res.model;
  Adam adam(model.params(), Adam::Options{cfg.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t K = model_cfg.edge_types, N = train.meta.nodes, T = train.meta.steps;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch) {
      const std::size_t count = std::min(cfg.batch, order.size() - first);
      std::vector<SceneStates> batch;
      for (std::size_t k = 0; k < count; ++k) batch.push_back(scenes[order[first + k]]);
      const Tensor noise = gumbel_noise(T * count * N * (N - 1), K, rng);

      Graph g(true);
      ElboTerms loss = batch_elbo(g, model, batch, &noise);
      const LossRecord rec{epoch, batches, loss.total.value().item(),
                           loss.nll.value().item() / static_cast<double>(count),
                           loss.kl.value().item() / static_cast<double>(count)};
      if (!std::isfinite(rec.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches) + " (nll " + std::to_string(rec.nll) + ", kl " +
                              std::to_string(rec.kl) + ")");
      }
      g.backward(loss.total);
      model.params().zero_grad();
      g.accumulate_into_store();
      adam.step(model.params());

      res.log.push_back(rec);
      if (observer) observer(rec);
      epoch_total += rec.loss;
      ++batches;
    }
    res.epoch_loss.push_back(epoch_total / static_cast<double>(batches));
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

nlohmann::json checkpoint_meta(const TrainResult& result, const TrainConfig& cfg) {
  return {{"norm", result.norm.to_json()}, {"train", cfg.to_json()}, {"epoch_loss", result.epoch_loss}};
}

TrainResult train_to_checkpoint(const std::filesystem::path& dataset, const ModelConfig& model_cfg,
                                const TrainConfig& cfg, const std::filesystem::path& checkpoint,
                                const std::filesystem::path& loss_log, const TrainObserver& observer) {
  const DatasetBundle bundle = read_dataset(dataset);
  TrainResult res = train_model(bundle, model_cfg, cfg, observer);
  save_model(checkpoint, res.model, checkpoint_meta(res, cfg));
  if (!loss_log.empty()) {
    std::ofstream f(loss_log, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + loss_log.string());
    f.precision(17);
    f << "epoch,batch,loss,nll,kl\n";
    for (const auto& r : res.log) f << r.epoch << ',' << r.batch << ',' << r.loss << ',' << r.nll << ',' << r.kl << '\n';
  }
  return res;
}

}  // namespace locs
