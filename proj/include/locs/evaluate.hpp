// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "locs/metrics.hpp"
#include "locs/model.hpp"
#include "locs/normalize.hpp"
#include "locs/simulate.hpp"

namespace locs {

struct EvalOptions {
  std::size_t observed_len = 25;
  std::size_t horizon = 25;
  std::uint64_t seed = 0;
  bool sample_edges = true;
  std::size_t batch = 16;

  nlohmann::json to_json() const;
};

/// Produces, for normalized scenes, the teacher-forced burn-in predictions
/// and the free rollout (same layout as RolloutResult).
using Forecaster =
    std::function<RolloutResult(std::span<const SceneStates> scenes, std::span<const std::uint64_t> seeds,
                                const EvalOptions& opts)>;

struct MetricsReport {
  ErrorCurves curves;           ///< rollout errors, mean of per-scene curves
  ErrorCurves pooled;           ///< rollout errors pooled over (scene, node)
  ErrorCurves baseline;         ///< constant-velocity forecast, same protocol
  std::vector<ErrorCurves> per_scene;
  double one_step_mse = 0.0;    ///< mean E over teacher-forced burn-in steps
  std::optional<F1Counts> relations;
  std::size_t scenes = 0;
  double seconds = 0.0;
  nlohmann::json config;

  nlohmann::json to_json() const;
  /// step,mse,l2_pos,l2_vel with step counted from 1.
  void write_csv(const std::filesystem::path& path) const;
};

/// Seed for a scene derived from its contents, so results do not depend on
/// scene order or on which other scenes are evaluated alongside it.
std::uint64_t scene_seed(std::uint64_t seed, const Trajectory& scene);

Forecaster model_forecaster(LocsModel& model);
/// Constant-velocity extrapolation from the last observed frame.
Forecaster constant_velocity_forecaster(double dt);

/// Rollout metrics in the original (unnormalized) data space.
MetricsReport evaluate_forecaster(const Forecaster& forecaster, const NormSpec& norm,
                                  const DatasetBundle& data, const EvalOptions& opts);

/// Relation counts of posterior argmax edges against the labels, over
/// transition timesteps t < T - 1.
F1Counts relation_counts(LocsModel& model, const NormSpec& norm, const DatasetBundle& data,
                         std::size_t batch = 16);

/// Rollout metrics plus relation F1 (when the dataset carries time-varying labels).
MetricsReport evaluate_model(LocsModel& model, const NormSpec& norm, const DatasetBundle& data,
                             const EvalOptions& opts);

MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                  const std::filesystem::path& dataset, const EvalOptions& opts);

}  // namespace locs
