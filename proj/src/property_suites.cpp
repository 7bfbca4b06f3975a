// SPDX-License-Identifier: Apache-2.0
#include "locs/property_suites.hpp"

#include <Eigen/LU>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "locs/frames.hpp"
#include "locs/geometry.hpp"
#include "locs/model.hpp"
#include "locs/normalize.hpp"
#include "locs/simulate.hpp"
#include "locs/train.hpp"

namespace locs {

using geometry::kPi;

bool Check::passed() const noexcept {
  if (!std::isfinite(measured)) return false;
  return expect_above ? measured > bound : measured <= bound;
}

bool SuiteReport::passed() const noexcept {
  for (const Check& c : checks)
    if (!c.passed()) return false;
  return time_limit <= 0.0 || seconds < time_limit;
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const Check& c : checks) {
    cs.push_back({{"name", c.name},
                  {"measured", c.measured},
                  {"bound", c.bound},
                  {"relation", c.expect_above ? ">" : "<="},
                  {"passed", c.passed()}});
  }
  return {{"suite", name}, {"passed", passed()}, {"seconds", seconds}, {"time_limit", time_limit},
          {"checks", cs}};
}

std::string SuiteReport::summary() const {
  std::ostringstream os;
  os.precision(3);
  for (const Check& c : checks) {
    os << (c.passed() ? "  ok   " : "  FAIL ") << c.name << ": " << std::scientific << c.measured
       << (c.expect_above ? " > " : " <= ") << c.bound << "\n";
  }
  os << std::fixed << "  time " << seconds << " s";
  if (time_limit > 0) os << " (limit " << time_limit << " s)";
  os << "\n";
  return os.str();
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::Matrix3d zyx_closed_form(double t, double p, double s) {
  const double ct = std::cos(t), st = std::sin(t), cp = std::cos(p), sp = std::sin(p);
  const double cs = std::cos(s), ss = std::sin(s);
  Eigen::Matrix3d m;
  m << ct * cp, ct * sp * ss - st * cs, ct * sp * cs + st * ss,  //
      st * cp, st * sp * ss + ct * cs, st * sp * cs - ct * ss,   //
      -sp, cp * ss, cp * cs;
  return m;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double max_diff(const Tensor& a, const Tensor& b) { return max_diff(a.storage(), b.storage()); }

/// Scenes with intrinsic orientations and generic states.
std::vector<SceneStates> random_intrinsic_scenes(std::mt19937_64& rng, int dim, std::size_t count,
                                                 std::size_t steps, std::size_t nodes) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> angle(-kPi, kPi), pitch(-0.45 * kPi, 0.45 * kPi);
  std::vector<SceneStates> out;
  for (std::size_t s = 0; s < count; ++s) {
    SceneStates sc;
    sc.dim = dim;
    sc.steps = steps;
    sc.nodes = nodes;
    sc.source = OrientationSource::intrinsic;
    sc.positions.resize(steps * nodes * dim);
    sc.velocities.resize(steps * nodes * dim);
    for (double& x : sc.positions) x = 2.0 * n01(rng);
    for (double& x : sc.velocities) x = n01(rng);
    for (std::size_t k = 0; k < steps * nodes; ++k) {
      if (dim == 2) {
        sc.orientations.push_back(angle(rng));
      } else {
        sc.orientations.push_back(angle(rng));
        sc.orientations.push_back(pitch(rng));
        sc.orientations.push_back(angle(rng));
      }
    }
    sc.validate();
    out.push_back(std::move(sc));
  }
  return out;
}

std::vector<double> canonical_features(const SceneStates& s, FrameKind frame) {
  std::vector<double> out;
  for (std::size_t t = 0; t < s.steps; ++t) {
    const CanonicalPairs c = canonicalize(s, t, frame);
    std::vector<double> buf(c.state_width() + c.spherical_width() + c.filter_input_width());
    for (std::size_t j = 0; j < s.nodes; ++j)
      for (std::size_t i = 0; i < s.nodes; ++i) {
        c.state_features(j, i, buf.data());
        c.spherical_features(j, i, buf.data() + c.state_width());
        c.filter_inputs(j, i, buf.data() + c.state_width() + c.spherical_width());
        out.insert(out.end(), buf.begin(), buf.end());
      }
  }
  return out;
}

std::pair<Tensor, Tensor> encoder_logits(LocsModel& model, std::span<const SceneStates> scenes) {
  Graph g(false);
  const FrameBatch fb = build_frame_batch(scenes, 0, scenes[0].steps, model.config().frame);
  const EdgeBeliefs b = model.encode(g, fb);
  return {b.prior_logits.value(), b.posterior_logits.value()};
}

std::vector<double> rollout_states(LocsModel& model, std::span<const SceneStates> scenes,
                                   std::size_t observed, std::size_t horizon) {
  RolloutOptions ro;
  ro.observed_len = observed;
  ro.horizon = horizon;
  ro.seed = 7;
  const RolloutResult r = rollout(model, scenes, ro);
  std::vector<double> out;
  for (const auto& p : r.predictions) out.insert(out.end(), p.data.begin(), p.data.end());
  return out;
}

std::vector<double> transform_states(const std::vector<double>& states, int dim, const RotoTranslation& g) {
  std::vector<double> out = states;
  const std::size_t D = dim;
  const Eigen::MatrixXd& q = g.rotation.matrix();
  for (std::size_t k = 0; k < states.size(); k += 2 * D) {
    const Eigen::Map<const Eigen::VectorXd> p(states.data() + k, dim), u(states.data() + k + D, dim);
    Eigen::Map<Eigen::VectorXd>(out.data() + k, dim) = q * p + g.translation;
    Eigen::Map<Eigen::VectorXd>(out.data() + k + D, dim) = q * u;
  }
  return out;
}

std::vector<SceneStates> transform_scenes(std::span<const SceneStates> scenes, const RotoTranslation& g) {
  std::vector<SceneStates> out;
  for (const auto& s : scenes) out.push_back(apply_global(s, g));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

SuiteReport rotation_group_suite(std::uint64_t seed, std::size_t samples) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  // Off the gimbal band: |phi| well inside pi/2.
  std::uniform_real_distribution<double> pitch(-0.49 * kPi, 0.49 * kPi);
  double ortho = 0, det = 0, compose = 0, closed = 0, euler = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double a = angle(rng), b = angle(rng);
    const Eigen::MatrixXd q2 = geometry::rot2d(a).matrix();
    ortho = std::max(ortho, max_abs(q2.transpose() * q2 - Eigen::MatrixXd::Identity(2, 2)));
    det = std::max(det, std::abs(q2.determinant() - 1.0));
    compose = std::max(compose, max_abs(geometry::rot2d(a).matrix() * geometry::rot2d(b).matrix() -
                                        geometry::rot2d(a + b).matrix()));

    const Eigen::Vector3d w(angle(rng), pitch(rng), angle(rng));
    const Eigen::MatrixXd q3 = geometry::rot3d(w).matrix();
    ortho = std::max(ortho, max_abs(q3.transpose() * q3 - Eigen::MatrixXd::Identity(3, 3)));
    det = std::max(det, std::abs(q3.determinant() - 1.0));
    closed = std::max(closed, max_abs(q3 - zyx_closed_form(w[0], w[1], w[2])));
    const Eigen::Vector3d back = geometry::euler_from_matrix(Eigen::Matrix3d(q3));
    euler = std::max(euler, (back - w).cwiseAbs().maxCoeff());
  }
  SuiteReport r{"rotation_group", {}, 0.0, 5.0};
  r.checks = {{"orthonormality", ortho, 1e-10},
              {"determinant", det, 1e-10},
              {"2d composition law", compose, 1e-12},
              {"3d elemental product vs closed form", closed, 1e-12},
              {"euler round trip off gimbal band", euler, 1e-9}};
  r.seconds = elapsed(start);
  return r;
}

// ---------------------------------------------------------------------------

SuiteReport invariance_suite(std::uint64_t seed, std::size_t transforms, std::size_t scenes) {
  const auto start = Clock::now();
  SuiteReport r{"invariance", {}, 0.0, 120.0};
  std::mt19937_64 rng(seed);
  constexpr std::size_t kSteps = 5, kNodes = 4, kObserved = 3, kHorizon = 2;

  for (int dim : {2, 3}) {
    const std::string tag = std::to_string(dim) + "d";
    const std::vector<SceneStates> base = random_intrinsic_scenes(rng, dim, scenes, kSteps, kNodes);

    ModelConfig markov;
    markov.dim = dim;
    markov.init_seed = seed + 11;
    ModelConfig recurrent = markov;
    recurrent.decoder = DecoderKind::recurrent;
    recurrent.decoder_anisotropic = true;
    recurrent.init_seed = seed + 12;
    LocsModel m_markov(markov), m_rec(recurrent);

    std::vector<std::vector<double>> canon0;
    for (const auto& s : base) canon0.push_back(canonical_features(s, FrameKind::roto_translated));
    const auto [prior0, post0] = encoder_logits(m_markov, base);
    const std::vector<double> roll_m0 = rollout_states(m_markov, base, kObserved, kHorizon);
    const std::vector<double> roll_r0 = rollout_states(m_rec, base, kObserved, kHorizon);

    double canon = 0, logits = 0, eq_m = 0, eq_r = 0;
    for (std::size_t k = 0; k < transforms; ++k) {
      const RotoTranslation g = random_rototranslation(derive_seed(seed, k + 1000 * dim), dim);
      const std::vector<SceneStates> moved = transform_scenes(base, g);
      for (std::size_t s = 0; s < base.size(); ++s) {
        canon = std::max(canon, max_diff(canonical_features(moved[s], FrameKind::roto_translated), canon0[s]));
      }
      const auto [prior1, post1] = encoder_logits(m_markov, moved);
      logits = std::max({logits, max_diff(prior1, prior0), max_diff(post1, post0)});
      eq_m = std::max(eq_m, max_diff(rollout_states(m_markov, moved, kObserved, kHorizon),
                                     transform_states(roll_m0, dim, g)));
      eq_r = std::max(eq_r, max_diff(rollout_states(m_rec, moved, kObserved, kHorizon),
                                     transform_states(roll_r0, dim, g)));
    }
    r.checks.push_back({tag + " canonicalization invariance", canon, 1e-9});
    r.checks.push_back({tag + " encoder logit invariance", logits, 1e-8});
    r.checks.push_back({tag + " markovian rollout equivariance", eq_m, 1e-8});
    r.checks.push_back({tag + " recurrent rollout equivariance", eq_r, 1e-8});

    // Ablations on one generic scene and one generic transform.
    const std::vector<SceneStates> one(base.begin(), base.begin() + 1);
    const RotoTranslation g = random_rototranslation(derive_seed(seed, 99 + dim), dim);
    const std::vector<SceneStates> one_moved = transform_scenes(one, g);

    ModelConfig global = markov;
    global.frame = FrameKind::global;
    LocsModel m_global(global);
    const auto [gp0, gq0] = encoder_logits(m_global, one);
    const auto [gp1, gq1] = encoder_logits(m_global, one_moved);
    r.checks.push_back({tag + " global frame breaks logit invariance", std::max(max_diff(gp0, gp1), max_diff(gq0, gq1)),
                        1e-6, true});
    r.checks.push_back({tag + " global frame breaks rollout equivariance",
                        max_diff(rollout_states(m_global, one_moved, kObserved, kHorizon),
                                 transform_states(rollout_states(m_global, one, kObserved, kHorizon), dim, g)),
                        1e-6, true});

    ModelConfig translated = markov;
    translated.frame = FrameKind::translated_only;
    LocsModel m_trans(translated);
    RotoTranslation shift{geometry::Rotation::identity(dim), g.translation};
    const auto [tp0, tq0] = encoder_logits(m_trans, one);
    const auto [tp1, tq1] = encoder_logits(m_trans, transform_scenes(one, shift));
    const auto [tp2, tq2] = encoder_logits(m_trans, one_moved);
    r.checks.push_back({tag + " translated-only frame: translation invariance",
                        std::max(max_diff(tp0, tp1), max_diff(tq0, tq1)), 1e-8});
    r.checks.push_back({tag + " translated-only frame breaks rotation invariance",
                        std::max(max_diff(tp0, tp2), max_diff(tq0, tq2)), 1e-6, true});
  }
  r.seconds = elapsed(start);
  return r;
}

// ---------------------------------------------------------------------------

SuiteReport gradient_suite(std::uint64_t seed) {
  const auto start = Clock::now();
  SuiteReport r{"gradient", {}, 0.0, 120.0};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  constexpr std::size_t kNodes = 3, kSteps = 4;

  Trajectory traj(2, kSteps, kNodes);
  for (double& x : traj.data) x = n01(rng);
  const std::vector<SceneStates> scenes{scene_from_trajectory(traj)};

  for (DecoderKind dec : {DecoderKind::markovian, DecoderKind::recurrent})
    for (FilterKind filt : {FilterKind::anisotropic, FilterKind::isotropic}) {
      ModelConfig cfg;
      cfg.dim = 2;
      cfg.hidden = 6;
      cfg.lstm_hidden = 4;
      cfg.head_hidden = 5;
      cfg.filter_hidden = 5;
      cfg.decoder = dec;
      cfg.filters = filt;
      cfg.decoder_anisotropic = filt == FilterKind::anisotropic;
      cfg.init_seed = seed + 3;
      LocsModel model(cfg);
      std::mt19937_64 noise_rng(seed + 5);
      const Tensor noise = gumbel_noise(kSteps * kNodes * (kNodes - 1), cfg.edge_types, noise_rng);
      const auto loss = [&](Graph& g) { return batch_elbo(g, model, scenes, &noise).total; };
      const double err = gradient_check_parameters(loss, model.params(), 1e-4, 0, seed);
      r.checks.push_back({to_string(dec) + " decoder, " + to_string(filt) + " filters", err, 1e-4});
    }
  r.seconds = elapsed(start);
  return r;
}

// ---------------------------------------------------------------------------

SuiteReport simulator_suite(std::uint64_t seed, std::size_t scenes) {
  const auto start = Clock::now();
  SuiteReport r{"simulator", {}, 0.0, 60.0};

  const ChargedConfig cc;
  const DatasetBundle charged = gen_charged(cc, scenes, seed);
  const std::size_t D = cc.dim, N = cc.nodes;
  double momentum = 0.0, reversal = 0.0;
  for (std::size_t s = 0; s < scenes; ++s) {
    const Trajectory tr = charged.scene(s);
    std::vector<double> p0(D, 0.0);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < D; ++d) p0[d] += tr.state(0, n)[D + d];
    for (std::size_t t = 1; t < tr.steps; ++t) {
      std::vector<double> pt(D, 0.0);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t d = 0; d < D; ++d) pt[d] += tr.state(t, n)[D + d];
      momentum = std::max(momentum, max_diff(pt, p0));
    }

    std::vector<double> pos(N * D), vel(N * D);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < D; ++d) {
        pos[n * D + d] = tr.state(0, n)[d];
        vel[n * D + d] = tr.state(0, n)[D + d];
      }
    const std::vector<double> pos0 = pos, vel0 = vel;
    const std::span<const double> q(charged.charges.data() + s * N, N);
    leapfrog(pos, vel, q, cc.dim, cc.dt_fine, 100, cc.coupling, cc.softening);
    for (double& v : vel) v = -v;
    leapfrog(pos, vel, q, cc.dim, cc.dt_fine, 100, cc.coupling, cc.softening);
    for (double& v : vel) v = -v;
    reversal = std::max({reversal, max_diff(pos, pos0), max_diff(vel, vel0)});
  }

  const SyntheticConfig sc;
  const DatasetBundle synth = gen_synthetic(sc, scenes, seed);
  double linear = 0.0;
  std::size_t label_mismatch = 0;
  for (std::size_t s = 0; s < scenes; ++s) {
    const Trajectory tr = synth.scene(s);
    for (std::size_t n = 0; n + 1 < sc.nodes; ++n)
      for (std::size_t t = 0; t < tr.steps; ++t)
        for (std::size_t d = 0; d < 2; ++d) {
          const double expect = tr.state(0, n)[d] + (static_cast<double>(t) * sc.dt) * tr.state(0, n)[2 + d];
          linear = std::max(linear, std::abs(tr.state(t, n)[d] - expect));
          linear = std::max(linear, std::abs(tr.state(t, n)[2 + d] - tr.state(0, n)[2 + d]));
        }
    const std::size_t pushed = sc.nodes - 1;
    for (std::size_t t = 0; t < tr.steps; ++t)
      for (std::size_t j = 0; j < sc.nodes; ++j)
        for (std::size_t i = 0; i < sc.nodes; ++i) {
          bool expect = false;
          if (i == pushed && j != pushed) {
            const double dx = tr.state(t, j)[0] - tr.state(t, i)[0];
            const double dy = tr.state(t, j)[1] - tr.state(t, i)[1];
            expect = std::sqrt(dx * dx + dy * dy) < sc.radius;
          }
          label_mismatch += (synth.edge(s, t, j, i) != 0) != expect;
        }
  }
  r.checks = {{"charged momentum conservation", momentum, 1e-9},
              {"leapfrog time reversal over 100 fine steps", reversal, 1e-6},
              {"synthetic non-pushed particles exactly linear", linear, 0.0},
              {"synthetic labels match distance predicate (mismatches)", static_cast<double>(label_mismatch), 0.0}};
  r.seconds = elapsed(start);
  return r;
}

// ---------------------------------------------------------------------------

SuiteReport normalization_suite(std::uint64_t seed) {
  const auto start = Clock::now();
  SuiteReport r{"normalization", {}, 0.0, 0.0};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;

  // Anisotropic fixture: wide spread along x, narrow along y.
  DatasetBundle fix;
  fix.meta.kind = "fixture";
  fix.meta.dim = 2;
  fix.meta.scenes = 4;
  fix.meta.steps = 6;
  fix.meta.nodes = 3;
  fix.meta.dt = 0.1;
  for (std::size_t k = 0; k < fix.meta.scenes * fix.meta.steps * fix.meta.nodes; ++k) {
    fix.trajectories.push_back(7.0 * n01(rng));
    fix.trajectories.push_back(0.3 * n01(rng));
    fix.trajectories.push_back(3.0 * n01(rng));
    fix.trajectories.push_back(0.2 * n01(rng));
  }
  fix.edges.assign(fix.meta.scenes * fix.meta.steps * fix.meta.nodes * fix.meta.nodes, 0);

  double round_trip = 0.0, direction = 0.0, direction_pow2 = 0.0, minmax_direction = 0.0;
  for (NormMode mode : {NormMode::speed, NormMode::minmax}) {
    const NormSpec spec = fit_normalization(fix, mode);
    std::vector<double> x = fix.trajectories;
    normalize_states(x, spec);
    std::vector<double> y = x;
    denormalize_states(y, spec);
    round_trip = std::max(round_trip, max_diff(y, fix.trajectories));
    for (std::size_t k = 0; k < x.size(); k += 4) {
      const double a0 = std::atan2(fix.trajectories[k + 3], fix.trajectories[k + 2]);
      const double a1 = std::atan2(x[k + 3], x[k + 2]);
      const double d = std::abs(geometry::wrap_angle(a1 - a0));
      if (mode == NormMode::speed) direction = std::max(direction, d);
      else minmax_direction = std::max(minmax_direction, d);
    }
  }
  {
    NormSpec pow2;
    pow2.mode = NormMode::speed;
    pow2.dim = 2;
    pow2.s_max = 4.0;
    std::vector<double> x = fix.trajectories;
    normalize_states(x, pow2);
    for (std::size_t k = 0; k < x.size(); k += 4) {
      const double a0 = std::atan2(fix.trajectories[k + 3], fix.trajectories[k + 2]);
      direction_pow2 = std::max(direction_pow2, std::abs(std::atan2(x[k + 3], x[k + 2]) - a0));
    }
  }
  r.checks.push_back({"denormalize(normalize(x)) identity", round_trip, 1e-12});
  r.checks.push_back({"speed mode velocity directions (power-of-two s_max)", direction_pow2, 0.0});
  r.checks.push_back({"speed mode velocity directions (fitted s_max)", direction, 1e-15});
  r.checks.push_back({"minmax mode changes velocity directions", minmax_direction, 1e-3, true});

  // normalize -> model -> denormalize against a global roto-translation.
  ModelConfig mc;
  mc.dim = 2;
  mc.init_seed = seed + 21;
  LocsModel model(mc);
  const RotoTranslation g = random_rototranslation(seed + 22, 2);
  const Trajectory scene = fix.scene(0);
  Trajectory moved = scene;
  moved.data = transform_states(scene.data, 2, g);
  for (NormMode mode : {NormMode::speed, NormMode::minmax}) {
    const NormSpec spec = fit_normalization(fix, mode);
    auto pipeline = [&](const Trajectory& t) {
      const std::vector<SceneStates> sc{scene_from_trajectory(normalize(t, spec))};
      RolloutOptions ro;
      ro.observed_len = 3;
      ro.horizon = 3;
      ro.seed = 5;
      return denormalize(rollout(model, sc, ro).predictions[0], spec).data;
    };
    const double dev = max_diff(pipeline(moved), transform_states(pipeline(scene), 2, g));
    if (mode == NormMode::speed) {
      r.checks.push_back({"pipeline equivariance with speed normalization", dev, 1e-7});
    } else {
      r.checks.push_back({"minmax normalization breaks pipeline equivariance", dev, 1e-3, true});
    }
  }
  r.seconds = elapsed(start);
  return r;
}

std::vector<std::string> suite_names() {
  return {"rotation", "invariance", "gradient", "simulator", "normalization"};
}

SuiteReport run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "rotation") return rotation_group_suite(seed);
  if (name == "invariance") return invariance_suite(seed);
  if (name == "gradient") return gradient_suite(seed);
  if (name == "simulator") return simulator_suite(seed);
  if (name == "normalization") return normalization_suite(seed);
  throw std::invalid_argument("unknown property suite: " + name);
}

}  // namespace locs
