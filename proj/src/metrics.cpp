// SPDX-License-Identifier: Apache-2.0
#include "locs/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace locs {

namespace {

void check_pair(const Trajectory& a, const Trajectory& b) {
  if (a.dim != b.dim || a.steps != b.steps || a.nodes != b.nodes) {
    throw std::invalid_argument("prediction and ground truth extents differ");
  }
  if (a.nodes == 0) throw std::invalid_argument("metrics need at least one node");
}

struct NodeErrors {
  double sq;
  double pos;
  double vel;
};

NodeErrors node_errors(const Trajectory& p, const Trajectory& t, std::size_t step, std::size_t n) {
  const std::size_t D = static_cast<std::size_t>(p.dim);
  const double* x = p.state(step, n);
  const double* y = t.state(step, n);
  double ep = 0.0, ev = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    ep += (x[d] - y[d]) * (x[d] - y[d]);
    ev += (x[D + d] - y[D + d]) * (x[D + d] - y[D + d]);
  }
  return {ep + ev, std::sqrt(ep), std::sqrt(ev)};
}

}  // namespace

ErrorCurves scene_error_curves(const Trajectory& prediction, const Trajectory& truth) {
  check_pair(prediction, truth);
  const std::size_t T = truth.steps, N = truth.nodes;
  const double nd = static_cast<double>(N * truth.dim);
  ErrorCurves c;
  c.mse.assign(T, 0.0);
  c.l2_pos.assign(T, 0.0);
  c.l2_vel.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      const NodeErrors e = node_errors(prediction, truth, t, n);
      c.mse[t] += e.sq;
      c.l2_pos[t] += e.pos;
      c.l2_vel[t] += e.vel;
    }
    c.mse[t] /= nd;
    c.l2_pos[t] /= static_cast<double>(N);
    c.l2_vel[t] /= static_cast<double>(N);
  }
  return c;
}

ErrorCurves mean_error_curves(std::span<const Trajectory> predictions, std::span<const Trajectory> truths) {
  if (predictions.size() != truths.size() || predictions.empty()) {
    throw std::invalid_argument("mean_error_curves: need matching non-empty scene lists");
  }
  ErrorCurves total;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const ErrorCurves c = scene_error_curves(predictions[s], truths[s]);
    if (s == 0) {
      total = c;
      continue;
    }
    if (c.size() != total.size()) throw std::invalid_argument("scenes have different horizons");
    for (std::size_t t = 0; t < c.size(); ++t) {
      total.mse[t] += c.mse[t];
      total.l2_pos[t] += c.l2_pos[t];
      total.l2_vel[t] += c.l2_vel[t];
    }
  }
  const double S = static_cast<double>(predictions.size());
  for (std::size_t t = 0; t < total.size(); ++t) {
    total.mse[t] /= S;
    total.l2_pos[t] /= S;
    total.l2_vel[t] /= S;
  }
  return total;
}

ErrorCurves pooled_error_curves(std::span<const Trajectory> predictions,
                                std::span<const Trajectory> truths) {
  if (predictions.size() != truths.size() || predictions.empty()) {
    throw std::invalid_argument("pooled_error_curves: need matching non-empty scene lists");
  }
  const std::size_t T = truths[0].steps;
  ErrorCurves c;
  c.mse.assign(T, 0.0);
  c.l2_pos.assign(T, 0.0);
  c.l2_vel.assign(T, 0.0);
  double nodes = 0.0, nd = 0.0;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    check_pair(predictions[s], truths[s]);
    if (truths[s].steps != T) throw std::invalid_argument("scenes have different horizons");
    nodes += static_cast<double>(truths[s].nodes);
    nd += static_cast<double>(truths[s].nodes * truths[s].dim);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < truths[s].nodes; ++n) {
        const NodeErrors e = node_errors(predictions[s], truths[s], t, n);
        c.mse[t] += e.sq;
        c.l2_pos[t] += e.pos;
        c.l2_vel[t] += e.vel;
      }
  }
  for (std::size_t t = 0; t < T; ++t) {
    c.mse[t] /= nd;
    c.l2_pos[t] /= nodes;
    c.l2_vel[t] /= nodes;
  }
  return c;
}

double F1Counts::f1() const noexcept {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

F1Counts& F1Counts::operator+=(const F1Counts& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

F1Counts f1_counts(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("f1: label count mismatch");
  F1Counts c;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const bool p = predicted[k] != 0, l = labels[k] != 0;
    if (p && l) ++c.tp;
    else if (p) ++c.fp;
    else if (l) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_relations(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels) {
  return f1_counts(predicted, labels).f1();
}

std::vector<std::uint8_t> edges_present(std::span<const double> scores, std::size_t types,
                                        std::size_t no_edge_type) {
  if (types == 0 || scores.size() % types != 0) throw std::invalid_argument("edges_present: bad shape");
  if (no_edge_type >= types) throw std::invalid_argument("edges_present: no-edge type out of range");
  std::vector<std::uint8_t> out(scores.size() / types);
  for (std::size_t r = 0; r < out.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < types; ++k)
      if (scores[r * types + k] > scores[r * types + best]) best = k;
    out[r] = best != no_edge_type;
  }
  return out;
}

}  // namespace locs
