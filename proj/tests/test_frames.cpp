// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "locs/frames.hpp"

using namespace locs;
using geometry::kPi;

namespace {

SceneStates random_scene(std::uint64_t seed, int dim, std::size_t nodes, OrientationSource source) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> a(-kPi, kPi), p(-1.4, 1.4);
  SceneStates s;
  s.dim = dim;
  s.steps = 2;
  s.nodes = nodes;
  s.source = source;
  for (std::size_t k = 0; k < s.steps * nodes * dim; ++k) {
    s.positions.push_back(2 * n(rng));
    s.velocities.push_back(n(rng));
  }
  if (source == OrientationSource::intrinsic) {
    for (std::size_t k = 0; k < s.steps * nodes; ++k) {
      s.orientations.push_back(a(rng));
      if (dim == 3) {
        s.orientations.push_back(p(rng));
        s.orientations.push_back(a(rng));
      }
    }
  } else {
    s.orientations.assign(s.steps * nodes * (dim == 2 ? 1 : 3), 0.0);
    s.refresh_orientations();
  }
  s.validate();
  return s;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double canon_diff(const CanonicalPairs& a, const CanonicalPairs& b) {
  return std::max({max_diff(a.rel_position, b.rel_position), max_diff(a.velocity, b.velocity),
                   max_diff(a.spherical, b.spherical), max_diff(a.rel_angle, b.rel_angle)});
}

}  // namespace

TEST_CASE("self pairs have zero relative position and angle") {
  for (int dim : {2, 3}) {
    const SceneStates s = random_scene(1, dim, 4, OrientationSource::intrinsic);
    const CanonicalPairs c = canonicalize(s, 0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(c.rel_position_of(i, i).norm() == 0.0);
      for (std::size_t k = 0; k < c.angle_dim(); ++k) CHECK(std::abs(c.rel_angle[c.pair_index(i, i) * c.angle_dim() + k]) < 1e-12);
    }
  }
}

TEST_CASE("hand-computed 2D canonical position") {
  SceneStates s;
  s.dim = 2;
  s.steps = 1;
  s.nodes = 2;
  s.source = OrientationSource::intrinsic;
  s.positions = {1, 0, 1, 1};  // i = node 0 at (1, 0); j = node 1 at (1, 1)
  s.velocities = {0, 0, 0, 0};
  s.orientations = {kPi / 2, 0.0};
  const CanonicalPairs c = canonicalize(s, 0);
  // Relative (0, 1) rotated by Q(pi/2)^T is (1, 0).
  CHECK(std::abs(c.rel_position_of(1, 0)[0] - 1.0) < 1e-15);
  CHECK(std::abs(c.rel_position_of(1, 0)[1]) < 1e-15);
  CHECK(std::abs(c.rel_angle[c.pair_index(1, 0)] - (-kPi / 2)) < 1e-15);
}

TEST_CASE("canonicalization is invariant under global roto-translations") {
  for (int dim : {2, 3}) {
    const SceneStates s = random_scene(10 + dim, dim, 5, OrientationSource::intrinsic);
    const CanonicalPairs base = canonicalize(s, 1);
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 100; ++k) {
      const RotoTranslation g = random_rototranslation(k, dim);
      worst = std::max(worst, canon_diff(canonicalize(apply_global(s, g), 1), base));
    }
    INFO("dim " << dim);
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("velocity-derived orientations: 2D exact, 3D exact about z") {
  const SceneStates s2 = random_scene(3, 2, 4, OrientationSource::velocity);
  const SceneStates s3 = random_scene(4, 3, 4, OrientationSource::velocity);
  for (std::uint64_t k = 0; k < 20; ++k) {
    CHECK(canon_diff(canonicalize(apply_global(s2, random_rototranslation(k, 2)), 0), canonicalize(s2, 0)) <= 1e-9);
    RotoTranslation about_z{geometry::Rotation::from_matrix(geometry::rot_z(0.3 + k)), Eigen::Vector3d(1, -2, 3)};
    CHECK(canon_diff(canonicalize(apply_global(s3, about_z), 0), canonicalize(s3, 0)) <= 1e-9);
  }
}

TEST_CASE("translated-only frames see translations but not rotations") {
  const SceneStates s = random_scene(5, 2, 4, OrientationSource::intrinsic);
  const CanonicalPairs base = canonicalize(s, 0, FrameKind::translated_only);
  const RotoTranslation g = random_rototranslation(9, 2);
  const RotoTranslation shift{geometry::Rotation::identity(2), g.translation};
  CHECK(canon_diff(canonicalize(apply_global(s, shift), 0, FrameKind::translated_only), base) <= 1e-9);
  CHECK(canon_diff(canonicalize(apply_global(s, g), 0, FrameKind::translated_only), base) > 1e-3);
  CHECK(canon_diff(canonicalize(apply_global(s, shift), 0, FrameKind::global), canonicalize(s, 0, FrameKind::global)) > 1e-3);
}

TEST_CASE("globalize_delta") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  const Eigen::Vector4d x(n(rng), n(rng), n(rng), n(rng));
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(1, 0.8);
  CHECK((globalize_delta(x, w, Eigen::Vector4d::Zero()) - x).norm() == 0.0);
  const Eigen::Vector4d d(n(rng), n(rng), n(rng), n(rng));
  CHECK((globalize_delta(x, Eigen::VectorXd::Zero(1), d) - (x + d)).norm() < 1e-15);

  for (int dim : {2, 3}) {
    const std::size_t A = dim == 2 ? 1 : 3;
    for (std::uint64_t k = 0; k < 50; ++k) {
      const RotoTranslation g = random_rototranslation(k + 100, dim);
      const Eigen::MatrixXd lift = g.rotation.lift(2);
      Eigen::VectorXd state(2 * dim), delta(2 * dim), omega(A);
      for (int c = 0; c < 2 * dim; ++c) {
        state[c] = n(rng);
        delta[c] = n(rng);
      }
      for (std::size_t c = 0; c < A; ++c) omega[c] = 0.5 * n(rng);
      // Rotate the orientation the same way apply_global does.
      SceneStates one;
      one.dim = dim;
      one.steps = 1;
      one.nodes = 1;
      one.source = OrientationSource::intrinsic;
      one.positions.assign(state.data(), state.data() + dim);
      one.velocities.assign(state.data() + dim, state.data() + 2 * dim);
      one.orientations.assign(omega.data(), omega.data() + A);
      const SceneStates moved = apply_global(one, g);
      Eigen::VectorXd state_g(2 * dim);
      state_g << Eigen::Map<const Eigen::VectorXd>(moved.positions.data(), dim),
          Eigen::Map<const Eigen::VectorXd>(moved.velocities.data(), dim);
      const Eigen::VectorXd omega_g = moved.orientation(0, 0);
      Eigen::VectorXd expect = lift * globalize_delta(state, omega, delta);
      expect.head(dim) += g.translation;
      CHECK((globalize_delta(state_g, omega_g, delta) - expect).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("apply_global examples") {
  const SceneStates s = random_scene(7, 3, 3, OrientationSource::intrinsic);
  const SceneStates same = apply_global(s, {geometry::Rotation::identity(3), Eigen::Vector3d::Zero()});
  CHECK(max_diff(same.positions, s.positions) == 0.0);
  CHECK(max_diff(same.velocities, s.velocities) == 0.0);
  CHECK(max_diff(same.orientations, s.orientations) < 1e-12);

  const SceneStates shifted = apply_global(s, {geometry::Rotation::identity(3), Eigen::Vector3d(1, 2, 3)});
  CHECK(shifted.velocities == s.velocities);

  const RotoTranslation a = random_rototranslation(1, 3), b = random_rototranslation(2, 3);
  const SceneStates twice = apply_global(apply_global(s, a), b);
  const SceneStates once = apply_global(s, b.after(a));
  CHECK(max_diff(twice.positions, once.positions) <= 1e-10);
  CHECK(max_diff(twice.velocities, once.velocities) <= 1e-10);
  for (std::size_t k = 0; k < s.steps * s.nodes; ++k) {
    const auto t = k / s.nodes, n = k % s.nodes;
    CHECK((geometry::rot3d(twice.orientation(t, n)).matrix() - geometry::rot3d(once.orientation(t, n)).matrix())
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }

  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(2, 2) = -1;
  CHECK_THROWS(apply_global(s, {geometry::Rotation::from_matrix(reflect), Eigen::Vector3d::Zero()}));
}

TEST_CASE("canonicalize rejects bad dimensions") {
  SceneStates s = random_scene(8, 2, 3, OrientationSource::intrinsic);
  s.dim = 4;
  CHECK_THROWS(canonicalize(s, 0));
}
