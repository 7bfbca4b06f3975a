// SPDX-License-Identifier: Apache-2.0
#include "locs/frames.hpp"

#include <Eigen/Geometry>
#include <random>
#include <stdexcept>

namespace locs {

using geometry::kPi;

FrameKind frame_from_string(const std::string& s) {
  if (s == "roto_translated") return FrameKind::roto_translated;
  if (s == "translated_only") return FrameKind::translated_only;
  if (s == "global") return FrameKind::global;
  throw std::invalid_argument("unknown frame kind: " + s);
}

std::string to_string(FrameKind f) {
  switch (f) {
    case FrameKind::roto_translated: return "roto_translated";
    case FrameKind::translated_only: return "translated_only";
    case FrameKind::global: return "global";
  }
  return "roto_translated";
}

SceneStates SceneStates::from_trajectory(int dim, std::size_t steps, std::size_t nodes,
                                         std::span<const double> trajectory) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("scene dimension must be 2 or 3");
  if (trajectory.size() != steps * nodes * 2 * dim) {
    throw std::invalid_argument("trajectory size does not match [T][N][2D]");
  }
  SceneStates s;
  s.dim = dim;
  s.steps = steps;
  s.nodes = nodes;
  s.source = OrientationSource::velocity;
  s.positions.resize(steps * nodes * dim);
  s.velocities.resize(steps * nodes * dim);
  for (std::size_t k = 0; k < steps * nodes; ++k) {
    for (int d = 0; d < dim; ++d) {
      s.positions[k * dim + d] = trajectory[k * 2 * dim + d];
      s.velocities[k * dim + d] = trajectory[k * 2 * dim + dim + d];
    }
  }
  s.refresh_orientations();
  return s;
}

void SceneStates::refresh_orientations() {
  if (source != OrientationSource::velocity) return;
  const std::size_t a = angle_dim();
  orientations.assign(steps * nodes * a, 0.0);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t n = 0; n < nodes; ++n) {
      const Eigen::VectorXd w = geometry::orientation_from_velocity(velocity(t, n));
      for (std::size_t k = 0; k < a; ++k) orientations[(t * nodes + n) * a + k] = w[k];
    }
}

void SceneStates::validate() const {
  if (dim != 2 && dim != 3) throw std::invalid_argument("scene dimension must be 2 or 3");
  const std::size_t cells = steps * nodes;
  if (positions.size() != cells * dim || velocities.size() != cells * dim ||
      orientations.size() != cells * angle_dim()) {
    throw std::invalid_argument("scene fields disagree on [T][N] extents");
  }
}

// ---------------------------------------------------------------------------

void CanonicalPairs::state_features(std::size_t j, std::size_t i, double* out) const {
  const std::size_t p = pair_index(j, i), a = angle_dim();
  for (int d = 0; d < dim; ++d) *out++ = rel_position[p * dim + d];
  for (std::size_t k = 0; k < a; ++k) *out++ = rel_angle[p * a + k] / kPi;
  for (int d = 0; d < dim; ++d) *out++ = velocity[p * dim + d];
}

void CanonicalPairs::spherical_features(std::size_t j, std::size_t i, double* out) const {
  const std::size_t p = pair_index(j, i);
  out[0] = spherical[p * dim];
  for (int d = 1; d < dim; ++d) out[d] = spherical[p * dim + d] / kPi;
}

void CanonicalPairs::filter_inputs(std::size_t j, std::size_t i, double* out) const {
  spherical_features(j, i, out);
  const std::size_t p = pair_index(j, i), a = angle_dim();
  for (std::size_t k = 0; k < a; ++k) out[dim + k] = rel_angle[p * a + k] / kPi;
}

namespace {

void store_spherical(const Eigen::VectorXd& r, double* out) {
  if (r.size() == 2) {
    const auto s = geometry::cart_to_polar(Eigen::Vector2d(r));
    out[0] = s.rho;
    out[1] = s.theta;
  } else {
    const auto s = geometry::cart_to_spherical(Eigen::Vector3d(r));
    out[0] = s.rho;
    out[1] = s.theta;
    out[2] = s.phi;
  }
}

}  // namespace

CanonicalPairs canonicalize(const SceneStates& scene, std::size_t t, FrameKind frame) {
  scene.validate();
  if (t >= scene.steps) throw std::out_of_range("canonicalize: timestep out of range");
  const int D = scene.dim;
  const std::size_t N = scene.nodes, A = scene.angle_dim();

  CanonicalPairs out;
  out.dim = D;
  out.nodes = N;
  out.frame = frame;
  out.rel_position.resize(N * N * D);
  out.rel_angle.resize(N * N * A);
  out.velocity.resize(N * N * D);
  out.spherical.resize(N * N * D);
  out.frame_rotation.resize(N * D * D);

  std::vector<Eigen::MatrixXd> frames(N);
  std::vector<Eigen::MatrixXd> orient(N);
  for (std::size_t i = 0; i < N; ++i) {
    orient[i] = geometry::rotation_from_orientation(scene.orientation(t, i)).matrix();
    frames[i] = frame == FrameKind::roto_translated ? orient[i]
                                                    : Eigen::MatrixXd::Identity(D, D);
    for (int r = 0; r < D; ++r)
      for (int c = 0; c < D; ++c) out.frame_rotation[i * D * D + r * D + c] = frames[i](r, c);
  }

  for (std::size_t i = 0; i < N; ++i) {
    const Eigen::MatrixXd qt = frames[i].transpose();
    const Eigen::VectorXd pi = scene.position(t, i);
    for (std::size_t j = 0; j < N; ++j) {
      const std::size_t p = out.pair_index(j, i);
      const Eigen::VectorXd rel = scene.position(t, j) - pi;
      Eigen::VectorXd r, s_src;
      Eigen::VectorXd ang(A);
      if (frame == FrameKind::roto_translated) {
        r = qt * rel;
        s_src = r;
        if (D == 2) {
          ang[0] = geometry::wrap_angle(scene.orientation(t, j)[0] - scene.orientation(t, i)[0]);
        } else {
          const Eigen::Vector3d e = geometry::euler_from_matrix(Eigen::Matrix3d(qt * orient[j]));
          for (int k = 0; k < 3; ++k) ang[k] = geometry::wrap_angle(e[k]);
        }
      } else {
        r = frame == FrameKind::global ? Eigen::VectorXd(scene.position(t, j)) : rel;
        s_src = rel;
        for (std::size_t k = 0; k < A; ++k) ang[k] = geometry::wrap_angle(scene.orientation(t, j)[k]);
      }
      const Eigen::VectorXd u = qt * scene.velocity(t, j);
      for (int d = 0; d < D; ++d) {
        out.rel_position[p * D + d] = r[d];
        out.velocity[p * D + d] = u[d];
      }
      for (std::size_t k = 0; k < A; ++k) out.rel_angle[p * A + k] = ang[k];
      store_spherical(s_src, out.spherical.data() + p * D);
    }
  }
  return out;
}

Eigen::VectorXd globalize_delta(const Eigen::VectorXd& state, const Eigen::VectorXd& orientation,
                                const Eigen::VectorXd& delta) {
  if (state.size() != delta.size() || state.size() % 2 != 0) {
    throw std::invalid_argument("globalize_delta: state and delta must both be [p, u]");
  }
  const geometry::Rotation q = geometry::rotation_from_orientation(orientation);
  if (2 * q.dim() != state.size()) throw std::invalid_argument("globalize_delta: dimension mismatch");
  return state + q.lift(2) * delta;
}

// ---------------------------------------------------------------------------

RotoTranslation RotoTranslation::after(const RotoTranslation& first) const {
  return {rotation * first.rotation, rotation.matrix() * first.translation + translation};
}

SceneStates apply_global(const SceneStates& scene, const RotoTranslation& g) {
  scene.validate();
  const int D = scene.dim;
  if (g.rotation.dim() != D || g.translation.size() != D) {
    throw geometry::NotARotation("global transform dimension does not match the scene");
  }
  // Re-validate: a Rotation is only constructible through checked paths, but
  // a default-constructed one is 2D.
  geometry::Rotation::from_matrix(g.rotation.matrix());

  SceneStates out = scene;
  const Eigen::MatrixXd& q = g.rotation.matrix();
  const std::size_t cells = scene.steps * scene.nodes;
  const std::size_t A = scene.angle_dim();
  for (std::size_t k = 0; k < cells; ++k) {
    Eigen::Map<Eigen::VectorXd> p(out.positions.data() + k * D, D);
    Eigen::Map<Eigen::VectorXd> u(out.velocities.data() + k * D, D);
    const Eigen::VectorXd p0 = p, u0 = u;
    p = q * p0 + g.translation;
    u = q * u0;
    if (scene.source == OrientationSource::intrinsic) {
      Eigen::Map<Eigen::VectorXd> w(out.orientations.data() + k * A, static_cast<Eigen::Index>(A));
      if (D == 2) {
        w[0] = geometry::wrap_angle(w[0] + std::atan2(q(1, 0), q(0, 0)));
      } else {
        const Eigen::Matrix3d m = q * geometry::rot3d(Eigen::Vector3d(w)).matrix();
        w = geometry::euler_from_matrix(m);
      }
    }
  }
  out.refresh_orientations();
  return out;
}

RotoTranslation random_rototranslation(std::uint64_t seed, int dim) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);
  RotoTranslation g;
  g.translation.resize(dim);
  if (dim == 2) {
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    g.rotation = geometry::rot2d(angle(rng));
  } else if (dim == 3) {
    std::normal_distribution<double> n01;
    Eigen::Quaterniond quat(n01(rng), n01(rng), n01(rng), n01(rng));
    quat.normalize();
    g.rotation = geometry::Rotation::from_matrix(Eigen::MatrixXd(quat.toRotationMatrix()));
  } else {
    throw std::invalid_argument("random_rototranslation: dimension must be 2 or 3");
  }
  for (int d = 0; d < dim; ++d) g.translation[d] = shift(rng);
  return g;
}

}  // namespace locs
