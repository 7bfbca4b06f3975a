// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "locs/trajectory.hpp"

namespace locs {

/// Three-particle 2D scenes: two particles drift at constant velocity, the
/// third is pushed radially away (constant magnitude) from any particle
/// closer than `radius`.
struct SyntheticConfig {
  std::size_t nodes = 3;
  std::size_t steps = 50;
  double dt = 0.1;
  double radius = 1.0;
  double push = 6.0;          ///< acceleration magnitude per active pusher
  double box = 2.0;           ///< initial positions (or meeting centers) uniform in [-box, box]^2
  /// When set, each particle is placed so that its straight path passes
  /// within `spread` of a shared meeting point at a uniform random time.
  bool encounters = true;
  double spread = 0.75;
  double speed_min = 0.5;
  double speed_max = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticConfig from_json(const nlohmann::json& j);
};

/// 3D charged particles integrated with velocity Verlet at dt_fine and
/// recorded every `stride` fine steps.
struct ChargedConfig {
  std::size_t nodes = 5;
  std::size_t steps = 49;
  int dim = 3;
  double dt_fine = 0.001;
  std::size_t stride = 100;
  double coupling = 1.0;
  double softening = 0.1;
  double position_std = 0.5;
  double speed = 0.5;
  bool zero_charges = false;  ///< test hook: all charges 0

  void validate() const;
  double dt() const noexcept { return dt_fine * static_cast<double>(stride); }
  nlohmann::json to_json() const;
  static ChargedConfig from_json(const nlohmann::json& j);
};

struct DatasetMeta {
  std::string kind;   ///< "synthetic" or "charged"
  std::string split;  ///< "train", "valid", "test" or free-form
  int dim = 2;
  std::size_t scenes = 0;
  std::size_t steps = 0;
  std::size_t nodes = 0;
  double dt = 0.1;
  std::size_t stride = 1;
  std::uint64_t seed = 0;
  bool has_charges = false;
  nlohmann::json config = nlohmann::json::object();
};

/// Trajectories [S][T][N][2D], directed edge labels [S][T][N][N] where
/// entry (j, i) marks j acting on i (diagonal zero), optional charges [S][N].
struct DatasetBundle {
  DatasetMeta meta;
  std::vector<double> trajectories;
  std::vector<std::uint8_t> edges;
  std::vector<double> charges;

  std::size_t scene_size() const noexcept { return meta.steps * meta.nodes * 2 * meta.dim; }
  Trajectory scene(std::size_t s) const;
  std::uint8_t edge(std::size_t s, std::size_t t, std::size_t j, std::size_t i) const {
    return edges[((s * meta.steps + t) * meta.nodes + j) * meta.nodes + i];
  }
  /// sign(q_i q_j) for the charged dataset: +1 repulsive, -1 attractive, 0 neutral.
  int interaction_sign(std::size_t s, std::size_t j, std::size_t i) const;
  /// Bundle holding only the listed scenes, in the given order.
  DatasetBundle subset(std::span<const std::size_t> scenes) const;
  void validate() const;
};

/// Independent per-scene stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

DatasetBundle gen_synthetic(const SyntheticConfig& cfg, std::size_t scenes, std::uint64_t seed,
                            const std::string& split = "train");
DatasetBundle gen_charged(const ChargedConfig& cfg, std::size_t scenes, std::uint64_t seed,
                          const std::string& split = "train");

/// Pairwise softened Coulomb forces, unit masses. `positions` is [N][D].
std::vector<double> charged_forces(std::span<const double> positions, std::span<const double> charges,
                                   int dim, double coupling, double softening);

/// Advances (positions, velocities) by `steps` velocity-Verlet steps of size dt.
void leapfrog(std::vector<double>& positions, std::vector<double>& velocities,
              std::span<const double> charges, int dim, double dt, std::size_t steps,
              double coupling, double softening);

/// p(t + k) = p(t) + k dt u(t) from the last prefix frame. Frame 0 of the
/// result is the last observed frame; frames 1..horizon are the forecast.
Trajectory constant_velocity_forecast(const Trajectory& prefix, std::size_t horizon, double dt);

/// Mean over nodes of the constant-velocity position error at the final
/// horizon step, forecasting from frame observed_len - 1.
double constant_velocity_error(const Trajectory& scene, std::size_t observed_len,
                               std::size_t horizon, double dt);

/// Scenes whose constant_velocity_error exceeds `threshold`.
std::vector<std::size_t> interactive_subset(const DatasetBundle& bundle, std::size_t observed_len,
                                            std::size_t horizon, double threshold = 1.5);

// Dataset directory format: meta.json plus trajectories.bin, edges.bin and
// (charged only) charges.bin. Each payload file starts with a little-endian
// u64 byte count and a u32 CRC32 of the payload.
void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle read_dataset(const std::filesystem::path& dir);
DatasetMeta read_dataset_meta(const std::filesystem::path& dir);

nlohmann::json meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const nlohmann::json& j);

}  // namespace locs
