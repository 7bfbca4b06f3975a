// SPDX-License-Identifier: Apache-2.0
#include "locs/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "locs/checkpoint.hpp"
#include "locs/train.hpp"

namespace locs {

nlohmann::json EvalOptions::to_json() const {
  return {{"observed_len", observed_len}, {"horizon", horizon}, {"seed", seed},
          {"sample_edges", sample_edges}, {"batch", batch}};
}

namespace {

nlohmann::json curves_json(const ErrorCurves& c) {
  return {{"mse", c.mse}, {"l2_pos", c.l2_pos}, {"l2_vel", c.l2_vel}};
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j = {{"curves", curves_json(curves)},
                      {"pooled_curves", curves_json(pooled)},
                      {"baseline_curves", curves_json(baseline)},
                      {"one_step_mse", one_step_mse},
                      {"scenes", scenes},
                      {"seconds", seconds},
                      {"aggregation", "mean over scenes of per-scene node-averaged errors"},
                      {"config", config}};
  if (!curves.mse.empty()) j["final_mse"] = curves.mse.back();
  if (relations) {
    j["relations"] = {{"f1", relations->f1()}, {"tp", relations->tp}, {"fp", relations->fp},
                      {"fn", relations->fn}, {"tn", relations->tn}};
  }
  return j;
}

void MetricsReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.precision(17);
  f << "step,mse,l2_pos,l2_vel\n";
  for (std::size_t t = 0; t < curves.size(); ++t) {
    f << t + 1 << ',' << curves.mse[t] << ',' << curves.l2_pos[t] << ',' << curves.l2_vel[t] << '\n';
  }
}

std::uint64_t scene_seed(std::uint64_t seed, const Trajectory& scene) {
  const auto* bytes = reinterpret_cast<const char*>(scene.data.data());
  return derive_seed(seed, crc32_of(bytes, scene.data.size() * sizeof(double)));
}

Forecaster model_forecaster(LocsModel& model) {
  return [&model](std::span<const SceneStates> scenes, std::span<const std::uint64_t> seeds,
                  const EvalOptions& opts) {
    RolloutOptions ro;
    ro.observed_len = opts.observed_len;
    ro.horizon = opts.horizon;
    ro.sample_edges = opts.sample_edges;
    ro.scene_seeds.assign(seeds.begin(), seeds.end());
    return rollout(model, scenes, ro);
  };
}

Forecaster constant_velocity_forecaster(double dt) {
  return [dt](std::span<const SceneStates> scenes, std::span<const std::uint64_t>, const EvalOptions& opts) {
    RolloutResult r;
    for (const SceneStates& s : scenes) {
      const std::size_t D = s.dim, N = s.nodes;
      Trajectory prefix(s.dim, opts.observed_len, N);
      for (std::size_t t = 0; t < opts.observed_len; ++t)
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t d = 0; d < D; ++d) {
            prefix.state(t, n)[d] = s.position(t, n)[d];
            prefix.state(t, n)[D + d] = s.velocity(t, n)[d];
          }
      const Trajectory f = constant_velocity_forecast(prefix, opts.horizon, dt);
      r.predictions.push_back(f.slice(1, opts.horizon));
      Trajectory burn(s.dim, opts.observed_len - 1, N);
      for (std::size_t t = 0; t + 1 < opts.observed_len; ++t) {
        const Trajectory one = constant_velocity_forecast(prefix.slice(t, 1), 1, dt);
        std::copy_n(one.state(1, 0), N * 2 * D, burn.state(t, 0));
      }
      r.burn_in.push_back(std::move(burn));
    }
    return r;
  };
}

MetricsReport evaluate_forecaster(const Forecaster& forecaster, const NormSpec& norm,
                                  const DatasetBundle& data, const EvalOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  data.validate();
  if (opts.observed_len == 0 || opts.horizon == 0) {
    throw std::invalid_argument("evaluate: observed_len and horizon must be positive");
  }
  if (opts.observed_len + opts.horizon > data.meta.steps) {
    throw std::invalid_argument("evaluate: observed_len + horizon (" +
                                std::to_string(opts.observed_len + opts.horizon) +
                                ") exceeds the scene length (" + std::to_string(data.meta.steps) + ")");
  }
  if (data.meta.scenes == 0) throw std::invalid_argument("evaluate: dataset is empty");
  const std::size_t batch = std::max<std::size_t>(1, opts.batch);

  std::vector<Trajectory> preds, truths, cv_preds;
  double one_step = 0.0;
  for (std::size_t first = 0; first < data.meta.scenes; first += batch) {
    const std::size_t count = std::min(batch, data.meta.scenes - first);
    std::vector<SceneStates> scenes;
    std::vector<std::uint64_t> seeds;
    std::vector<Trajectory> raw;
    for (std::size_t k = 0; k < count; ++k) {
      raw.push_back(data.scene(first + k));
      seeds.push_back(scene_seed(opts.seed, raw.back()));
      scenes.push_back(scene_from_trajectory(normalize(raw.back().slice(0, opts.observed_len), norm)));
    }
    const RolloutResult r = forecaster(scenes, seeds, opts);
    if (r.predictions.size() != count || r.burn_in.size() != count) {
      throw std::logic_error("forecaster returned the wrong number of scenes");
    }
    for (std::size_t k = 0; k < count; ++k) {
      preds.push_back(denormalize(r.predictions[k], norm));
      truths.push_back(raw[k].slice(opts.observed_len, opts.horizon));
      if (opts.observed_len > 1) {
        const ErrorCurves c = scene_error_curves(denormalize(r.burn_in[k], norm),
                                                 raw[k].slice(1, opts.observed_len - 1));
        double m = 0.0;
        for (double v : c.mse) m += v;
        one_step += m / static_cast<double>(c.size());
      }
      const Trajectory f = constant_velocity_forecast(raw[k].slice(0, opts.observed_len), opts.horizon,
                                                      data.meta.dt);
      cv_preds.push_back(f.slice(1, opts.horizon));
    }
  }

  MetricsReport rep;
  rep.scenes = data.meta.scenes;
  rep.curves = mean_error_curves(preds, truths);
  rep.pooled = pooled_error_curves(preds, truths);
  rep.baseline = mean_error_curves(cv_preds, truths);
  for (std::size_t s = 0; s < preds.size(); ++s) rep.per_scene.push_back(scene_error_curves(preds[s], truths[s]));
  rep.one_step_mse = one_step / static_cast<double>(data.meta.scenes);
  rep.config = {{"eval", opts.to_json()}, {"norm", norm.to_json()}, {"dataset", meta_to_json(data.meta)}};
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

F1Counts relation_counts(LocsModel& model, const NormSpec& norm, const DatasetBundle& data,
                         std::size_t batch) {
  const std::size_t N = data.meta.nodes, T = data.meta.steps, K = model.config().edge_types;
  if (T < 2) throw std::invalid_argument("relation_counts: scenes need at least two timesteps");
  const auto pairs = directed_pairs(N);
  const std::size_t P = pairs.size();
  batch = std::max<std::size_t>(1, batch);
  F1Counts total;
  for (std::size_t first = 0; first < data.meta.scenes; first += batch) {
    const std::size_t count = std::min(batch, data.meta.scenes - first);
    std::vector<SceneStates> scenes;
    for (std::size_t k = 0; k < count; ++k) {
      scenes.push_back(scene_from_trajectory(normalize(data.scene(first + k), norm)));
    }
    Graph g(false);
    const FrameBatch fb = build_frame_batch(scenes, 0, T, model.config().frame);
    const EdgeBeliefs b = model.encode(g, fb);
    const std::vector<std::uint8_t> pred = edges_present(b.posterior_logits.value().data(), K, 0);
    std::vector<std::uint8_t> p, l;
    for (std::size_t t = 0; t + 1 < T; ++t)
      for (std::size_t k = 0; k < count; ++k)
        for (std::size_t q = 0; q < P; ++q) {
          p.push_back(pred[(t * count + k) * P + q]);
          l.push_back(data.edge(first + k, t, pairs[q].first, pairs[q].second));
        }
    total += f1_counts(p, l);
  }
  return total;
}

MetricsReport evaluate_model(LocsModel& model, const NormSpec& norm, const DatasetBundle& data,
                             const EvalOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  MetricsReport rep = evaluate_forecaster(model_forecaster(model), norm, data, opts);
  rep.relations = relation_counts(model, norm, data, opts.batch);
  rep.config["model"] = model.config().to_json();
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                  const std::filesystem::path& dataset, const EvalOptions& opts) {
  auto [model, meta] = load_model(checkpoint);
  if (!meta.contains("norm")) throw FormatError(checkpoint.string() + ": checkpoint has no normalization");
  const NormSpec norm = NormSpec::from_json(meta.at("norm"));
  const DatasetBundle data = read_dataset(dataset);
  return evaluate_model(model, norm, data, opts);
}

}  // namespace locs
