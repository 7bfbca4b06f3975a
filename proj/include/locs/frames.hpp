// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "locs/geometry.hpp"

namespace locs {

/// Coordinate frame each target node sees its neighbours in.
enum class FrameKind {
  roto_translated,  ///< translate to the target and rotate by its orientation
  translated_only,  ///< translate to the target, keep global axes
  global,           ///< absolute coordinates (no canonicalization)
};

FrameKind frame_from_string(const std::string& s);
std::string to_string(FrameKind f);

enum class OrientationSource {
  intrinsic,  ///< orientations are part of the data
  velocity,   ///< orientations are derived from velocity directions
};

/// Positions, velocities and orientations of one scene, each [T][N][*].
struct SceneStates {
  int dim = 2;
  std::size_t steps = 0;
  std::size_t nodes = 0;
  std::vector<double> positions;
  std::vector<double> velocities;
  std::vector<double> orientations;
  OrientationSource source = OrientationSource::velocity;

  std::size_t angle_dim() const noexcept { return dim == 2 ? 1 : 3; }

  Eigen::Map<const Eigen::VectorXd> position(std::size_t t, std::size_t n) const {
    return {positions.data() + (t * nodes + n) * dim, dim};
  }
  Eigen::Map<const Eigen::VectorXd> velocity(std::size_t t, std::size_t n) const {
    return {velocities.data() + (t * nodes + n) * dim, dim};
  }
  Eigen::Map<const Eigen::VectorXd> orientation(std::size_t t, std::size_t n) const {
    const auto a = static_cast<Eigen::Index>(angle_dim());
    return {orientations.data() + (t * nodes + n) * a, a};
  }

  /// Builds a scene from [T][N][2D] rows of (position, velocity); orientations
  /// are derived from velocities.
  static SceneStates from_trajectory(int dim, std::size_t steps, std::size_t nodes,
                                     std::span<const double> trajectory);

  /// Recomputes velocity-derived orientations; no-op for intrinsic ones.
  void refresh_orientations();
  /// Throws std::invalid_argument on inconsistent extents or dimension.
  void validate() const;
};

/// v_{j|i} for every ordered pair (including j == i) at one timestep.
///
/// Pair (j, i) means neighbour j seen from target i and is stored at
/// index j * nodes + i. Angles are kept in radians (wrapped); the feature
/// accessors divide them by pi.
struct CanonicalPairs {
  int dim = 2;
  std::size_t nodes = 0;
  FrameKind frame = FrameKind::roto_translated;
  std::vector<double> rel_position;   // [pair][D]
  std::vector<double> rel_angle;      // [pair][A]
  std::vector<double> velocity;       // [pair][D]
  std::vector<double> spherical;      // [pair][D]: (rho, theta) or (rho, theta, phi)
  std::vector<double> frame_rotation; // [target][D*D] row-major Q_i

  std::size_t angle_dim() const noexcept { return dim == 2 ? 1 : 3; }
  std::size_t pair_index(std::size_t j, std::size_t i) const noexcept { return j * nodes + i; }

  /// Width of [r, omega/pi, u].
  std::size_t state_width() const noexcept { return 2 * dim + angle_dim(); }
  std::size_t spherical_width() const noexcept { return dim; }
  /// Width of [s, omega/pi] fed to filter-generating networks.
  std::size_t filter_input_width() const noexcept { return dim + angle_dim(); }

  void state_features(std::size_t j, std::size_t i, double* out) const;
  void spherical_features(std::size_t j, std::size_t i, double* out) const;
  void filter_inputs(std::size_t j, std::size_t i, double* out) const;

  Eigen::Map<const Eigen::VectorXd> rel_position_of(std::size_t j, std::size_t i) const {
    return {rel_position.data() + pair_index(j, i) * dim, dim};
  }
  Eigen::Map<const Eigen::VectorXd> velocity_of(std::size_t j, std::size_t i) const {
    return {velocity.data() + pair_index(j, i) * dim, dim};
  }
};

/// Canonicalizes timestep `t` of `scene` into per-target local frames.
CanonicalPairs canonicalize(const SceneStates& scene, std::size_t t,
                            FrameKind frame = FrameKind::roto_translated);

/// x + (Q(omega) (+) Q(omega)) * delta for a state x = [p, u].
Eigen::VectorXd globalize_delta(const Eigen::VectorXd& state, const Eigen::VectorXd& orientation,
                                const Eigen::VectorXd& delta);

struct RotoTranslation {
  geometry::Rotation rotation;
  Eigen::VectorXd translation;

  /// this after `first`: p -> Q (Q1 p + t1) + t.
  RotoTranslation after(const RotoTranslation& first) const;
  Eigen::VectorXd apply_point(const Eigen::VectorXd& p) const {
    return rotation.matrix() * p + translation;
  }
};

/// Rotates and translates positions, rotates velocities and orientations.
SceneStates apply_global(const SceneStates& scene, const RotoTranslation& g);

/// Uniformly random rotation (Haar in 3D) and a translation in [-10, 10]^D.
RotoTranslation random_rototranslation(std::uint64_t seed, int dim);

}  // namespace locs
