// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "locs/trajectory.hpp"

namespace locs {

/// Per-step error curves of one scene or averaged over scenes.
///   mse[t]    = 1/(N D) sum_i ||x_i - x^_i||^2 over the full (p, u) state
///   l2_pos[t] = 1/N sum_i ||p_i - p^_i||
///   l2_vel[t] = 1/N sum_i ||u_i - u^_i||
struct ErrorCurves {
  std::vector<double> mse;
  std::vector<double> l2_pos;
  std::vector<double> l2_vel;

  std::size_t size() const noexcept { return mse.size(); }
};

ErrorCurves scene_error_curves(const Trajectory& prediction, const Trajectory& truth);

/// Mean over scenes of per-scene node-averaged curves.
ErrorCurves mean_error_curves(std::span<const Trajectory> predictions, std::span<const Trajectory> truths);

/// Same curves pooled over every (scene, node) pair.
ErrorCurves pooled_error_curves(std::span<const Trajectory> predictions,
                                std::span<const Trajectory> truths);

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  /// 2 TP / (2 TP + FP + FN); 1 when there is nothing to find and nothing predicted.
  double f1() const noexcept;
  F1Counts& operator+=(const F1Counts& o) noexcept;
};

/// Binary interaction-present counts over aligned predicted and true labels.
F1Counts f1_counts(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels);
double f1_relations(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels);

/// Row-wise argmax != no-edge type over [rows][K] edge scores.
std::vector<std::uint8_t> edges_present(std::span<const double> scores, std::size_t types,
                                        std::size_t no_edge_type = 0);

}  // namespace locs
