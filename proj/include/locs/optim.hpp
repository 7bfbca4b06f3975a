// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "locs/params.hpp"

namespace locs {

/// Adam over the trainable entries of a store, reading the store's grad tensors.
class Adam {
 public:
  struct Options {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(const ParameterStore& store, Options opts);

  void step(ParameterStore& store);
  long steps() const noexcept { return t_; }

 private:
  Options opts_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

}  // namespace locs
