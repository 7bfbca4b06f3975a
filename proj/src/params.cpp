// SPDX-License-Identifier: Apache-2.0
#include "locs/params.hpp"

#include <cmath>
#include <stdexcept>

namespace locs {

ParamId ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  const std::size_t idx = entries_.size();
  by_name_.emplace(name, idx);
  Tensor grad(value.shape());
  entries_.push_back(Entry{std::move(name), std::move(value), std::move(grad), trainable});
  return ParamId{idx};
}

ParamId ParameterStore::add_uniform(std::string name, Shape shape, std::size_t fan_in,
                                    std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return add(std::move(name), std::move(t), true);
}

ParamId ParameterStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("unknown parameter: " + name);
  return ParamId{it->second};
}

bool ParameterStore::contains(const std::string& name) const { return by_name_.count(name) > 0; }

std::size_t ParameterStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) {
    if (e.grad.size() != e.value.size()) e.grad = Tensor(e.value.shape());
    e.grad.fill(0.0);
  }
}

}  // namespace locs
