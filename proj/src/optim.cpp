// SPDX-License-Identifier: Apache-2.0
#include "locs/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace locs {

Adam::Adam(const ParameterStore& store, Options opts) : opts_(opts) {
  for (const auto& e : store.entries()) {
    m_.emplace_back(e.value.shape());
    v_.emplace_back(e.value.shape());
  }
}

void Adam::step(ParameterStore& store) {
  if (store.size() != m_.size()) throw std::logic_error("optimizer bound to a different store");
  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < store.size(); ++k) {
    auto& e = store.entries()[k];
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      m_[k][i] = opts_.beta1 * m_[k][i] + (1.0 - opts_.beta1) * g;
      v_[k][i] = opts_.beta2 * v_[k][i] + (1.0 - opts_.beta2) * g * g;
      const double mhat = m_[k][i] / c1;
      const double vhat = v_[k][i] / c2;
      e.value[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

}  // namespace locs
