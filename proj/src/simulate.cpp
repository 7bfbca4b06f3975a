// SPDX-License-Identifier: Apache-2.0
#include "locs/simulate.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace locs {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void SyntheticConfig::validate() const {
  require(nodes >= 3, "synthetic: need at least 3 particles");
  require(steps >= 2, "synthetic: need at least 2 timesteps");
  require(dt > 0 && radius > 0 && push > 0 && box > 0, "synthetic: constants must be positive");
  require(speed_min > 0 && speed_max >= speed_min, "synthetic: invalid speed range");
  require(spread >= 0, "synthetic: spread must be non-negative");
}

nlohmann::json SyntheticConfig::to_json() const {
  return {{"nodes", nodes}, {"steps", steps}, {"dt", dt},       {"radius", radius},
          {"push", push},   {"box", box},     {"speed_min", speed_min}, {"speed_max", speed_max},
          {"encounters", encounters}, {"spread", spread}};
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  read_field(j, "nodes", c.nodes);
  read_field(j, "steps", c.steps);
  read_field(j, "dt", c.dt);
  read_field(j, "radius", c.radius);
  read_field(j, "push", c.push);
  read_field(j, "box", c.box);
  read_field(j, "speed_min", c.speed_min);
  read_field(j, "speed_max", c.speed_max);
  read_field(j, "encounters", c.encounters);
  read_field(j, "spread", c.spread);
  c.validate();
  return c;
}

void ChargedConfig::validate() const {
  require(nodes >= 2, "charged: need at least 2 particles");
  require(steps >= 2, "charged: need at least 2 timesteps");
  require(dim == 2 || dim == 3, "charged: dimension must be 2 or 3");
  require(dt_fine > 0 && stride > 0, "charged: dt_fine and stride must be positive");
  require(coupling > 0 && softening > 0, "charged: force constants must be positive");
  require(position_std > 0 && speed > 0, "charged: initial scales must be positive");
}

nlohmann::json ChargedConfig::to_json() const {
  return {{"nodes", nodes},       {"steps", steps},     {"dim", dim},
          {"dt_fine", dt_fine},   {"stride", stride},   {"coupling", coupling},
          {"softening", softening}, {"position_std", position_std}, {"speed", speed},
          {"zero_charges", zero_charges}};
}

ChargedConfig ChargedConfig::from_json(const nlohmann::json& j) {
  ChargedConfig c;
  read_field(j, "nodes", c.nodes);
  read_field(j, "steps", c.steps);
  read_field(j, "dim", c.dim);
  read_field(j, "dt_fine", c.dt_fine);
  read_field(j, "stride", c.stride);
  read_field(j, "coupling", c.coupling);
  read_field(j, "softening", c.softening);
  read_field(j, "position_std", c.position_std);
  read_field(j, "speed", c.speed);
  read_field(j, "zero_charges", c.zero_charges);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

Trajectory DatasetBundle::scene(std::size_t s) const {
  if (s >= meta.scenes) throw std::out_of_range("scene index out of range");
  Trajectory t(meta.dim, meta.steps, meta.nodes);
  const auto off = static_cast<std::ptrdiff_t>(s * scene_size());
  std::copy(trajectories.begin() + off, trajectories.begin() + off + static_cast<std::ptrdiff_t>(scene_size()),
            t.data.begin());
  return t;
}

int DatasetBundle::interaction_sign(std::size_t s, std::size_t j, std::size_t i) const {
  if (!meta.has_charges) throw std::logic_error("dataset has no charges");
  const double q = charges[s * meta.nodes + j] * charges[s * meta.nodes + i];
  return (q > 0) - (q < 0);
}

DatasetBundle DatasetBundle::subset(std::span<const std::size_t> scenes) const {
  DatasetBundle out;
  out.meta = meta;
  out.meta.scenes = scenes.size();
  const std::size_t e = meta.steps * meta.nodes * meta.nodes;
  for (std::size_t s : scenes) {
    if (s >= meta.scenes) throw std::out_of_range("subset: scene index out of range");
    const auto* tr = trajectories.data() + s * scene_size();
    out.trajectories.insert(out.trajectories.end(), tr, tr + scene_size());
    const auto* ed = edges.data() + s * e;
    out.edges.insert(out.edges.end(), ed, ed + e);
    if (meta.has_charges) {
      const auto* q = charges.data() + s * meta.nodes;
      out.charges.insert(out.charges.end(), q, q + meta.nodes);
    }
  }
  return out;
}

void DatasetBundle::validate() const {
  require(meta.dim == 2 || meta.dim == 3, "dataset: dimension must be 2 or 3");
  require(meta.steps >= 1 && meta.nodes >= 1, "dataset: empty extents");
  require(trajectories.size() == meta.scenes * scene_size(), "dataset: trajectory size mismatch");
  require(edges.size() == meta.scenes * meta.steps * meta.nodes * meta.nodes,
          "dataset: edge label size mismatch");
  require(charges.size() == (meta.has_charges ? meta.scenes * meta.nodes : 0),
          "dataset: charge size mismatch");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ index);
}

// ---------------------------------------------------------------------------

namespace {

void synthetic_scene(const SyntheticConfig& cfg, std::uint64_t seed, double* traj, std::uint8_t* edges) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-cfg.box, cfg.box);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> spd(cfg.speed_min, cfg.speed_max);

  const std::size_t N = cfg.nodes, T = cfg.steps, pushed = N - 1;
  std::uniform_real_distribution<double> jitter(-cfg.spread, cfg.spread);
  std::uniform_real_distribution<double> meet(0.0, static_cast<double>(cfg.steps - 1) * cfg.dt);
  std::vector<std::array<double, 2>> p0(N), u0(N);
  const std::array<double, 2> center{pos(rng), pos(rng)};
  const double t_meet = meet(rng);
  for (std::size_t n = 0; n < N; ++n) {
    const double a = ang(rng), s = spd(rng);
    u0[n] = {s * std::cos(a), s * std::sin(a)};
    if (cfg.encounters) {
      const double jx = jitter(rng), jy = jitter(rng);
      p0[n] = {center[0] + jx - t_meet * u0[n][0], center[1] + jy - t_meet * u0[n][1]};
    } else {
      p0[n] = {pos(rng), pos(rng)};
    }
  }

  auto put = [&](std::size_t t, std::size_t n, const std::array<double, 2>& p,
                 const std::array<double, 2>& u) {
    double* x = traj + (t * N + n) * 4;
    x[0] = p[0];
    x[1] = p[1];
    x[2] = u[0];
    x[3] = u[1];
  };

  // Free particles follow the closed form exactly.
  for (std::size_t n = 0; n < pushed; ++n)
    for (std::size_t t = 0; t < T; ++t) {
      const double k = static_cast<double>(t) * cfg.dt;
      put(t, n, {p0[n][0] + k * u0[n][0], p0[n][1] + k * u0[n][1]}, u0[n]);
    }

  // The pushed particle moves linearly from an anchor until its velocity changes.
  std::array<double, 2> anchor = p0[pushed], u = u0[pushed], p = p0[pushed];
  std::size_t anchor_t = 0;
  for (std::size_t t = 0; t < T; ++t) {
    put(t, pushed, p, u);
    std::array<double, 2> acc{0.0, 0.0};
    for (std::size_t j = 0; j < pushed; ++j) {
      const double* pj = traj + (t * N + j) * 4;
      const double dx = p[0] - pj[0], dy = p[1] - pj[1];
      const double d = std::hypot(dx, dy);
      if (d < cfg.radius) {
        edges[(t * N + j) * N + pushed] = 1;
        if (d > 0) {
          acc[0] += cfg.push * dx / d;
          acc[1] += cfg.push * dy / d;
        }
      }
    }
    if (t + 1 == T) break;
    if (acc[0] != 0.0 || acc[1] != 0.0) {
      u = {u[0] + cfg.dt * acc[0], u[1] + cfg.dt * acc[1]};
      anchor = p;
      anchor_t = t;
    }
    const double k = static_cast<double>(t + 1 - anchor_t) * cfg.dt;
    p = {anchor[0] + k * u[0], anchor[1] + k * u[1]};
  }
}

}  // namespace

DatasetBundle gen_synthetic(const SyntheticConfig& cfg, std::size_t scenes, std::uint64_t seed,
                            const std::string& split) {
  cfg.validate();
  DatasetBundle b;
  b.meta.kind = "synthetic";
  b.meta.split = split;
  b.meta.dim = 2;
  b.meta.scenes = scenes;
  b.meta.steps = cfg.steps;
  b.meta.nodes = cfg.nodes;
  b.meta.dt = cfg.dt;
  b.meta.stride = 1;
  b.meta.seed = seed;
  b.meta.config = cfg.to_json();
  b.trajectories.assign(scenes * b.scene_size(), 0.0);
  b.edges.assign(scenes * cfg.steps * cfg.nodes * cfg.nodes, 0);
  for (std::size_t s = 0; s < scenes; ++s) {
    synthetic_scene(cfg, derive_seed(seed, s), b.trajectories.data() + s * b.scene_size(),
                    b.edges.data() + s * cfg.steps * cfg.nodes * cfg.nodes);
  }
  return b;
}

std::vector<double> charged_forces(std::span<const double> positions, std::span<const double> charges,
                                   int dim, double coupling, double softening) {
  const std::size_t N = charges.size();
  if (positions.size() != N * static_cast<std::size_t>(dim)) {
    throw std::invalid_argument("charged_forces: positions must be [N][D]");
  }
  std::vector<double> f(positions.size(), 0.0);
  const double floor3 = softening * softening * softening;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      double d[3] = {0, 0, 0};
      double r2 = 0.0;
      for (int k = 0; k < dim; ++k) {
        d[k] = positions[i * dim + k] - positions[j * dim + k];
        r2 += d[k] * d[k];
      }
      const double r3 = std::max(r2 * std::sqrt(r2), floor3);
      const double scale = coupling * charges[i] * charges[j] / r3;
      for (int k = 0; k < dim; ++k) {
        const double fk = scale * d[k];
        f[i * dim + k] += fk;
        f[j * dim + k] -= fk;
      }
    }
  return f;
}

void leapfrog(std::vector<double>& positions, std::vector<double>& velocities,
              std::span<const double> charges, int dim, double dt, std::size_t steps, double coupling,
              double softening) {
  std::vector<double> a = charged_forces(positions, charges, dim, coupling, softening);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t k = 0; k < positions.size(); ++k) {
      velocities[k] += 0.5 * dt * a[k];
      positions[k] += dt * velocities[k];
    }
    a = charged_forces(positions, charges, dim, coupling, softening);
    for (std::size_t k = 0; k < positions.size(); ++k) velocities[k] += 0.5 * dt * a[k];
  }
}

DatasetBundle gen_charged(const ChargedConfig& cfg, std::size_t scenes, std::uint64_t seed,
                          const std::string& split) {
  cfg.validate();
  DatasetBundle b;
  b.meta.kind = "charged";
  b.meta.split = split;
  b.meta.dim = cfg.dim;
  b.meta.scenes = scenes;
  b.meta.steps = cfg.steps;
  b.meta.nodes = cfg.nodes;
  b.meta.dt = cfg.dt();
  b.meta.stride = cfg.stride;
  b.meta.seed = seed;
  b.meta.has_charges = true;
  b.meta.config = cfg.to_json();

  const std::size_t N = cfg.nodes, D = static_cast<std::size_t>(cfg.dim);
  b.trajectories.assign(scenes * b.scene_size(), 0.0);
  b.edges.assign(scenes * cfg.steps * N * N, 0);
  b.charges.assign(scenes * N, 0.0);

  for (std::size_t s = 0; s < scenes; ++s) {
    std::mt19937_64 rng(derive_seed(seed, s));
    std::normal_distribution<double> pos(0.0, cfg.position_std);
    std::normal_distribution<double> vel(0.0, 1.0);
    std::bernoulli_distribution sign(0.5);

    std::vector<double> p(N * D), u(N * D), q(N);
    for (auto& x : p) x = pos(rng);
    for (std::size_t n = 0; n < N; ++n) {
      double norm = 0.0;
      for (std::size_t k = 0; k < D; ++k) {
        u[n * D + k] = vel(rng);
        norm += u[n * D + k] * u[n * D + k];
      }
      norm = std::sqrt(norm);
      for (std::size_t k = 0; k < D; ++k) u[n * D + k] *= cfg.speed / norm;
    }
    for (auto& c : q) c = sign(rng) ? 1.0 : -1.0;
    if (cfg.zero_charges) std::fill(q.begin(), q.end(), 0.0);
    std::copy(q.begin(), q.end(), b.charges.begin() + static_cast<std::ptrdiff_t>(s * N));

    double* traj = b.trajectories.data() + s * b.scene_size();
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      if (t > 0) leapfrog(p, u, q, cfg.dim, cfg.dt_fine, cfg.stride, cfg.coupling, cfg.softening);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < D; ++k) {
          traj[(t * N + n) * 2 * D + k] = p[n * D + k];
          traj[(t * N + n) * 2 * D + D + k] = u[n * D + k];
        }
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t i = 0; i < N; ++i)
          b.edges[((s * cfg.steps + t) * N + j) * N + i] = j != i;
    }
  }
  return b;
}

// ---------------------------------------------------------------------------

Trajectory constant_velocity_forecast(const Trajectory& prefix, std::size_t horizon, double dt) {
  if (prefix.steps == 0) throw std::invalid_argument("constant_velocity_forecast: empty prefix");
  const std::size_t D = static_cast<std::size_t>(prefix.dim);
  Trajectory out(prefix.dim, horizon + 1, prefix.nodes);
  for (std::size_t n = 0; n < prefix.nodes; ++n) {
    const double* x = prefix.state(prefix.steps - 1, n);
    for (std::size_t k = 0; k <= horizon; ++k) {
      double* y = out.state(k, n);
      const double h = static_cast<double>(k) * dt;
      for (std::size_t d = 0; d < D; ++d) {
        y[d] = x[d] + h * x[D + d];
        y[D + d] = x[D + d];
      }
    }
  }
  return out;
}

double constant_velocity_error(const Trajectory& scene, std::size_t observed_len, std::size_t horizon,
                               double dt) {
  if (observed_len == 0 || observed_len + horizon > scene.steps) {
    throw std::invalid_argument("constant_velocity_error: scene too short");
  }
  const Trajectory f = constant_velocity_forecast(scene.slice(0, observed_len), horizon, dt);
  const std::size_t D = static_cast<std::size_t>(scene.dim);
  double total = 0.0;
  for (std::size_t n = 0; n < scene.nodes; ++n) {
    const double* truth = scene.state(observed_len - 1 + horizon, n);
    const double* pred = f.state(horizon, n);
    double e = 0.0;
    for (std::size_t d = 0; d < D; ++d) e += (truth[d] - pred[d]) * (truth[d] - pred[d]);
    total += std::sqrt(e);
  }
  return total / static_cast<double>(scene.nodes);
}

std::vector<std::size_t> interactive_subset(const DatasetBundle& bundle, std::size_t observed_len,
                                            std::size_t horizon, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < bundle.meta.scenes; ++s) {
    if (constant_velocity_error(bundle.scene(s), observed_len, horizon, bundle.meta.dt) > threshold) {
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace locs
