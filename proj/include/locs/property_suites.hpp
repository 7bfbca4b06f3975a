// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace locs {

/// One measured quantity against a bound. `expect_above` inverts the check
/// for cases that must fail (an ablation that breaks a symmetry).
struct Check {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool expect_above = false;

  bool passed() const noexcept;
};

struct SuiteReport {
  std::string name;
  std::vector<Check> checks;
  double seconds = 0.0;
  double time_limit = 0.0;  ///< 0 means unlimited

  bool passed() const noexcept;
  nlohmann::json to_json() const;
  /// Human-readable lines, one per check.
  std::string summary() const;
};

/// Orthonormality, composition, closed forms and Euler round trips over random angles.
SuiteReport rotation_group_suite(std::uint64_t seed, std::size_t samples = 1000);

/// Canonicalization / encoder invariance and rollout equivariance under random
/// global roto-translations with intrinsic orientations, plus the frame ablations.
SuiteReport invariance_suite(std::uint64_t seed, std::size_t transforms = 100, std::size_t scenes = 10);

/// Full-loss autodiff against central differences for both decoders and both filter kinds.
SuiteReport gradient_suite(std::uint64_t seed);

/// Momentum conservation, leapfrog reversibility, exact linear drift and label predicates.
SuiteReport simulator_suite(std::uint64_t seed, std::size_t scenes = 100);

/// Round trips, direction preservation and pipeline equivariance per normalization mode.
SuiteReport normalization_suite(std::uint64_t seed);

std::vector<std::string> suite_names();
SuiteReport run_suite(const std::string& name, std::uint64_t seed);

}  // namespace locs
