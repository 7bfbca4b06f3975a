// SPDX-License-Identifier: Apache-2.0
#include "locs/loss.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace locs {

Var gaussian_nll(Var mean, const Tensor& target, double sigma2) {
  if (!(sigma2 > 0)) throw std::invalid_argument("sigma2 must be positive");
  if (mean.shape() != target.shape()) {
    throw ShapeError("gaussian_nll: prediction " + to_string(mean.shape()) + " vs target " +
                     to_string(target.shape()));
  }
  Graph& g = mean.graph();
  Var diff = sub(mean, g.constant(target));
  const double per_entry = 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
  return add_scalar(scale(sum(square(diff)), 1.0 / (2.0 * sigma2)),
                    per_entry * static_cast<double>(target.size()));
}

Var categorical_kl(Var posterior_logits, Var prior_logits) {
  if (posterior_logits.shape() != prior_logits.shape()) throw ShapeError("categorical_kl: shape mismatch");
  Var logq = log_softmax_rows(posterior_logits);
  Var logp = log_softmax_rows(prior_logits);
  return sum(mul(exp(logq), sub(logq, logp)));
}

Var fixed_prior_kl(Var posterior_logits, double no_edge) {
  if (!(no_edge > 0 && no_edge < 1)) throw std::invalid_argument("no-edge prior must lie in (0, 1)");
  const std::size_t R = posterior_logits.rows(), K = posterior_logits.cols();
  if (K < 2) throw ShapeError("fixed_prior_kl needs at least two edge types");
  Tensor logp = Tensor::matrix(R, K, std::log((1.0 - no_edge) / static_cast<double>(K - 1)));
  for (std::size_t r = 0; r < R; ++r) logp(r, 0) = std::log(no_edge);
  Var logq = log_softmax_rows(posterior_logits);
  return sum(mul(exp(logq), sub(logq, posterior_logits.graph().constant(logp))));
}

ElboTerms elbo_loss(Var mean, const Tensor& target, Var posterior_logits, Var prior_logits,
                    double sigma2, double scenes, std::optional<double> no_edge_prior) {
  if (!(scenes > 0)) throw std::invalid_argument("elbo_loss: scene count must be positive");
  ElboTerms t;
  t.nll = gaussian_nll(mean, target, sigma2);
  t.kl = categorical_kl(posterior_logits, prior_logits);
  Var total = add(t.nll, t.kl);
  if (no_edge_prior) {
    t.fixed_kl = fixed_prior_kl(posterior_logits, *no_edge_prior);
    total = add(total, t.fixed_kl);
  }
  t.total = scale(total, 1.0 / scenes);
  return t;
}

}  // namespace locs
