// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "locs/autodiff.hpp"
#include "locs/tensor.hpp"

namespace locs {

struct ElboTerms {
  Var total;  ///< nll + kl (+ fixed_kl)
  Var nll;
  Var kl;
  Var fixed_kl;  ///< invalid unless a fixed no-edge prior is given
};

/// Gaussian negative log-likelihood with fixed variance, summed over every
/// entry: sum (x - mu)^2 / (2 sigma2) + 0.5 log(2 pi sigma2).
Var gaussian_nll(Var mean, const Tensor& target, double sigma2);

/// sum over rows of sum_k q_k (log q_k - log p_k) with q, p given as logits.
Var categorical_kl(Var posterior_logits, Var prior_logits);

/// KL from q to a fixed categorical with `no_edge` mass on type 0 and the
/// rest spread evenly.
Var fixed_prior_kl(Var posterior_logits, double no_edge);

/// Negative ELBO divided by `scenes` (a per-scene average over the batch).
ElboTerms elbo_loss(Var mean, const Tensor& target, Var posterior_logits, Var prior_logits,
                    double sigma2, double scenes = 1.0,
                    std::optional<double> no_edge_prior = std::nullopt);

}  // namespace locs
