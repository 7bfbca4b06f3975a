// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "locs/tensor.hpp"

namespace locs {

/// Index of a tensor registered in a ParameterStore.
struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const noexcept { return index != static_cast<std::size_t>(-1); }
  friend bool operator==(ParamId, ParamId) = default;
};

/// Named parameter tensors in registration order.
///
/// Non-trainable entries hold buffers such as batch-norm running statistics;
/// they are serialized with the model but never receive gradients.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
  };

  ParamId add(std::string name, Tensor value, bool trainable = true);

  /// Adds a [fan_in, fan_out] (or [fan_out]) tensor drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  ParamId add_uniform(std::string name, Shape shape, std::size_t fan_in, std::mt19937_64& rng);

  ParamId find(const std::string& name) const;
  bool contains(const std::string& name) const;

  Tensor& value(ParamId id) { return entries_.at(id.index).value; }
  const Tensor& value(ParamId id) const { return entries_.at(id.index).value; }
  Tensor& grad(ParamId id) { return entries_.at(id.index).grad; }
  const Entry& entry(ParamId id) const { return entries_.at(id.index); }
  Entry& entry(ParamId id) { return entries_.at(id.index); }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }

  /// Total scalar count over trainable entries.
  std::size_t trainable_count() const;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> by_name_;
};

}  // namespace locs
