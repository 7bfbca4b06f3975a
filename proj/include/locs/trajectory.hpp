// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace locs {

/// Scene states indexed [time][node][feature] with features (position, velocity).
struct Trajectory {
  int dim = 2;
  std::size_t steps = 0;
  std::size_t nodes = 0;
  std::vector<double> data;

  Trajectory() = default;
  Trajectory(int d, std::size_t t, std::size_t n)
      : dim(d), steps(t), nodes(n), data(t * n * 2 * static_cast<std::size_t>(d), 0.0) {}

  std::size_t width() const noexcept { return 2 * static_cast<std::size_t>(dim); }
  std::size_t frame_size() const noexcept { return nodes * width(); }

  double* state(std::size_t t, std::size_t n) { return data.data() + (t * nodes + n) * width(); }
  const double* state(std::size_t t, std::size_t n) const {
    return data.data() + (t * nodes + n) * width();
  }
  std::span<const double> frame(std::size_t t) const {
    return {data.data() + t * frame_size(), frame_size()};
  }

  /// Frames [start, start + count).
  Trajectory slice(std::size_t start, std::size_t count) const {
    if (start + count > steps) throw std::out_of_range("trajectory slice out of range");
    Trajectory out(dim, count, nodes);
    std::copy(data.begin() + static_cast<std::ptrdiff_t>(start * frame_size()),
              data.begin() + static_cast<std::ptrdiff_t>((start + count) * frame_size()),
              out.data.begin());
    return out;
  }
};

}  // namespace locs
