// SPDX-License-Identifier: Apache-2.0
#include "locs/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace locs {

NormMode norm_mode_from_string(const std::string& s) {
  if (s == "none") return NormMode::none;
  if (s == "speed") return NormMode::speed;
  if (s == "minmax") return NormMode::minmax;
  throw std::invalid_argument("unknown normalization mode: " + s);
}

std::string to_string(NormMode m) {
  switch (m) {
    case NormMode::none: return "none";
    case NormMode::speed: return "speed";
    case NormMode::minmax: return "minmax";
  }
  return "none";
}

void NormSpec::validate() const {
  if (dim != 2 && dim != 3) throw std::invalid_argument("normalization dimension must be 2 or 3");
  if (mode == NormMode::speed && !(s_max > 0 && std::isfinite(s_max))) {
    throw std::invalid_argument("speed normalization needs s_max > 0");
  }
  if (mode == NormMode::minmax) {
    const std::size_t w = 2 * static_cast<std::size_t>(dim);
    if (min.size() != w || max.size() != w) throw std::invalid_argument("minmax needs 2D extrema");
    for (std::size_t k = 0; k < w; ++k)
      if (!(max[k] > min[k])) throw std::invalid_argument("minmax feature has an empty range");
  }
}

nlohmann::json NormSpec::to_json() const {
  return {{"mode", to_string(mode)}, {"dim", dim}, {"s_max", s_max}, {"min", min}, {"max", max}};
}

NormSpec NormSpec::from_json(const nlohmann::json& j) {
  NormSpec s;
  s.mode = norm_mode_from_string(j.at("mode").get<std::string>());
  s.dim = j.at("dim").get<int>();
  s.s_max = j.at("s_max").get<double>();
  s.min = j.value("min", std::vector<double>{});
  s.max = j.value("max", std::vector<double>{});
  s.validate();
  return s;
}

NormSpec fit_normalization(const DatasetBundle& train, NormMode mode) {
  train.validate();
  NormSpec s;
  s.mode = mode;
  s.dim = train.meta.dim;
  const std::size_t D = train.meta.dim, W = 2 * D;
  const std::size_t rows = train.trajectories.size() / W;
  if (mode == NormMode::speed) {
    double best = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      double v = 0.0;
      for (std::size_t d = 0; d < D; ++d) v += train.trajectories[r * W + D + d] * train.trajectories[r * W + D + d];
      best = std::max(best, std::sqrt(v));
    }
    s.s_max = best;
  } else if (mode == NormMode::minmax) {
    s.min.assign(W, std::numeric_limits<double>::infinity());
    s.max.assign(W, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < W; ++k) {
        s.min[k] = std::min(s.min[k], train.trajectories[r * W + k]);
        s.max[k] = std::max(s.max[k], train.trajectories[r * W + k]);
      }
  }
  s.validate();
  return s;
}

void normalize_states(std::span<double> states, const NormSpec& spec) {
  const std::size_t W = 2 * static_cast<std::size_t>(spec.dim);
  if (states.size() % W != 0) throw std::invalid_argument("states are not rows of (p, u)");
  switch (spec.mode) {
    case NormMode::none: return;
    case NormMode::speed:
      for (double& x : states) x /= spec.s_max;
      return;
    case NormMode::minmax:
      for (std::size_t k = 0; k < states.size(); ++k) {
        const std::size_t f = k % W;
        states[k] = 2.0 * (states[k] - spec.min[f]) / (spec.max[f] - spec.min[f]) - 1.0;
      }
      return;
  }
}

void denormalize_states(std::span<double> states, const NormSpec& spec) {
  const std::size_t W = 2 * static_cast<std::size_t>(spec.dim);
  if (states.size() % W != 0) throw std::invalid_argument("states are not rows of (p, u)");
  switch (spec.mode) {
    case NormMode::none: return;
    case NormMode::speed:
      for (double& x : states) x *= spec.s_max;
      return;
    case NormMode::minmax:
      for (std::size_t k = 0; k < states.size(); ++k) {
        const std::size_t f = k % W;
        states[k] = (states[k] + 1.0) * 0.5 * (spec.max[f] - spec.min[f]) + spec.min[f];
      }
      return;
  }
}

Trajectory normalize(const Trajectory& traj, const NormSpec& spec) {
  if (traj.dim != spec.dim) throw std::invalid_argument("normalize: dimension mismatch");
  Trajectory out = traj;
  normalize_states(out.data, spec);
  return out;
}

Trajectory denormalize(const Trajectory& traj, const NormSpec& spec) {
  if (traj.dim != spec.dim) throw std::invalid_argument("denormalize: dimension mismatch");
  Trajectory out = traj;
  denormalize_states(out.data, spec);
  return out;
}

DatasetBundle normalize(const DatasetBundle& bundle, const NormSpec& spec) {
  if (bundle.meta.dim != spec.dim) throw std::invalid_argument("normalize: dimension mismatch");
  DatasetBundle out = bundle;
  normalize_states(out.trajectories, spec);
  return out;
}

}  // namespace locs
