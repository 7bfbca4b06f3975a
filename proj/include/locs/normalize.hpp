// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "locs/simulate.hpp"
#include "locs/trajectory.hpp"

namespace locs {

enum class NormMode { none, speed, minmax };

NormMode norm_mode_from_string(const std::string& s);
std::string to_string(NormMode m);

/// speed: x' = x / s_max for positions and velocities alike.
/// minmax: per-feature affine map of [min, max] onto [-1, 1].
struct NormSpec {
  NormMode mode = NormMode::speed;
  int dim = 2;
  double s_max = 1.0;
  std::vector<double> min;  ///< [2D], minmax only
  std::vector<double> max;  ///< [2D], minmax only

  void validate() const;
  nlohmann::json to_json() const;
  static NormSpec from_json(const nlohmann::json& j);
};

/// Fits on a training split: maximum velocity norm, or per-feature extrema.
NormSpec fit_normalization(const DatasetBundle& train, NormMode mode);

/// In-place maps over rows of (p, u) states.
void normalize_states(std::span<double> states, const NormSpec& spec);
void denormalize_states(std::span<double> states, const NormSpec& spec);

Trajectory normalize(const Trajectory& traj, const NormSpec& spec);
Trajectory denormalize(const Trajectory& traj, const NormSpec& spec);
DatasetBundle normalize(const DatasetBundle& bundle, const NormSpec& spec);

}  // namespace locs
