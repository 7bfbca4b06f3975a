// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "locs/checkpoint.hpp"
#include "locs/simulate.hpp"

using namespace locs;
using locs::test::TempDir;

namespace {

double dist2d(const double* a, const double* b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

/// One-node, one-dimensional-motion fixture scene with a given final displacement.
DatasetBundle cv_fixture(const std::vector<double>& final_offsets) {
  DatasetBundle b;
  b.meta.kind = "fixture";
  b.meta.dim = 2;
  b.meta.scenes = final_offsets.size();
  b.meta.steps = 3;
  b.meta.nodes = 1;
  b.meta.dt = 1.0;
  for (double off : final_offsets) {
    const double frames[3][4] = {{0, 0, 0, 0}, {0, 0, 0, 0}, {off, 0, off, 0}};
    for (const auto& f : frames) b.trajectories.insert(b.trajectories.end(), f, f + 4);
  }
  b.edges.assign(b.meta.scenes * 3, 0);
  return b;
}

}  // namespace

TEST_CASE("synthetic generator") {
  SyntheticConfig cfg;
  const DatasetBundle b = gen_synthetic(cfg, 60, 11);
  const std::size_t N = cfg.nodes, pushed = N - 1;

  SUBCASE("non-pushed particles are exactly linear") {
    for (std::size_t s = 0; s < 60; ++s) {
      const Trajectory tr = b.scene(s);
      for (std::size_t n = 0; n < pushed; ++n)
        for (std::size_t t = 0; t < tr.steps; ++t)
          for (int d = 0; d < 2; ++d) {
            const double k = static_cast<double>(t) * cfg.dt;
            CHECK(tr.state(t, n)[d] == tr.state(0, n)[d] + k * tr.state(0, n)[2 + d]);
          }
    }
  }
  SUBCASE("labels are exactly the distance predicate") {
    for (std::size_t s = 0; s < 60; ++s) {
      const Trajectory tr = b.scene(s);
      for (std::size_t t = 0; t < tr.steps; ++t)
        for (std::size_t j = 0; j < N; ++j)
          for (std::size_t i = 0; i < N; ++i) {
            const bool expect = i == pushed && j != pushed && dist2d(tr.state(t, j), tr.state(t, i)) < cfg.radius;
            CHECK((b.edge(s, t, j, i) != 0) == expect);
          }
    }
  }
  SUBCASE("a push moves the particle away from the pusher") {
    std::size_t events = 0;
    for (std::size_t s = 0; s < 60; ++s) {
      const Trajectory tr = b.scene(s);
      for (std::size_t t = 0; t + 1 < tr.steps; ++t)
        for (std::size_t j = 0; j < pushed; ++j) {
          if (!b.edge(s, t, j, pushed)) continue;
          const double* x = tr.state(t, pushed);
          const double free[2] = {x[0] + cfg.dt * x[2], x[1] + cfg.dt * x[3]};
          CHECK(dist2d(tr.state(t + 1, pushed), tr.state(t + 1, j)) > dist2d(free, tr.state(t + 1, j)));
          ++events;
        }
    }
    CHECK(events > 0);
  }
  SUBCASE("a particle that never comes close moves linearly") {
    SyntheticConfig spread_out = cfg;
    spread_out.encounters = false;
    const DatasetBundle b = gen_synthetic(spread_out, 60, 11);
    std::size_t quiet = 0;
    for (std::size_t s = 0; s < 60; ++s) {
      bool any = false;
      for (std::size_t t = 0; t < cfg.steps; ++t)
        for (std::size_t j = 0; j < N; ++j) any = any || b.edge(s, t, j, pushed);
      if (any) continue;
      ++quiet;
      const Trajectory tr = b.scene(s);
      for (std::size_t t = 0; t < tr.steps; ++t) {
        CHECK(tr.state(t, pushed)[2] == tr.state(0, pushed)[2]);
        CHECK(std::abs(tr.state(t, pushed)[0] - (tr.state(0, pushed)[0] + t * cfg.dt * tr.state(0, pushed)[2])) < 1e-12);
      }
    }
    CHECK(quiet > 0);
  }
  SUBCASE("diagonal labels are zero") {
    for (std::size_t s = 0; s < 60; ++s)
      for (std::size_t t = 0; t < cfg.steps; ++t)
        for (std::size_t n = 0; n < N; ++n) CHECK(b.edge(s, t, n, n) == 0);
  }
  SUBCASE("invalid configs are rejected") {
    SyntheticConfig bad = cfg;
    bad.radius = -1;
    CHECK_THROWS(gen_synthetic(bad, 1, 0));
    bad = cfg;
    bad.steps = 1;
    CHECK_THROWS(gen_synthetic(bad, 1, 0));
  }
}

TEST_CASE("generation is deterministic and per-scene seeded") {
  const DatasetBundle a = gen_synthetic({}, 20, 5), b = gen_synthetic({}, 20, 5);
  CHECK(a.trajectories == b.trajectories);
  CHECK(a.edges == b.edges);
  const DatasetBundle more = gen_synthetic({}, 30, 5);
  CHECK(std::equal(a.trajectories.begin(), a.trajectories.end(), more.trajectories.begin()));
  const DatasetBundle c = gen_charged({}, 4, 5), d = gen_charged({}, 4, 5);
  CHECK(c.trajectories == d.trajectories);
  CHECK(c.charges == d.charges);
  CHECK(gen_synthetic({}, 20, 6).trajectories != a.trajectories);
}

TEST_CASE("charged generator") {
  ChargedConfig cfg;
  const DatasetBundle b = gen_charged(cfg, 6, 3);
  const std::size_t N = cfg.nodes, D = cfg.dim;
  CHECK(b.meta.has_charges);
  for (double q : b.charges) CHECK((q == 1.0 || q == -1.0));
  for (std::size_t s = 0; s < 6; ++s)
    for (std::size_t t = 0; t < cfg.steps; ++t)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t i = 0; i < N; ++i) CHECK(b.edge(s, t, j, i) == (i != j ? 1 : 0));

  SUBCASE("opposite charges attract") {
    const std::vector<double> pos = {0, 0, 0, 1, 0, 0}, q = {1, -1};
    const std::vector<double> f = charged_forces(pos, q, 3, 1.0, 0.1);
    CHECK(f[0] > 0);   // node 0 pulled toward +x
    CHECK(f[3] < 0);   // node 1 pulled toward -x
    CHECK(f[0] == -f[3]);
    const std::vector<double> g = charged_forces(pos, std::vector<double>{1, 1}, 3, 1.0, 0.1);
    CHECK(g[0] < 0);
  }
  SUBCASE("momentum is conserved") {
    for (std::size_t s = 0; s < 6; ++s) {
      const Trajectory tr = b.scene(s);
      for (std::size_t t = 1; t < tr.steps; ++t)
        for (std::size_t d = 0; d < D; ++d) {
          double p0 = 0, pt = 0;
          for (std::size_t n = 0; n < N; ++n) {
            p0 += tr.state(0, n)[D + d];
            pt += tr.state(t, n)[D + d];
          }
          CHECK(std::abs(pt - p0) <= 1e-9);
        }
    }
  }
  SUBCASE("zero charges give linear motion") {
    ChargedConfig zero = cfg;
    zero.zero_charges = true;
    const DatasetBundle z = gen_charged(zero, 2, 3);
    for (std::size_t s = 0; s < 2; ++s) {
      const Trajectory tr = z.scene(s);
      for (std::size_t t = 0; t < tr.steps; ++t)
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t d = 0; d < D; ++d) {
            CHECK(tr.state(t, n)[D + d] == tr.state(0, n)[D + d]);
            CHECK(std::abs(tr.state(t, n)[d] - (tr.state(0, n)[d] + t * zero.dt() * tr.state(0, n)[D + d])) < 1e-9);
          }
    }
  }
  SUBCASE("leapfrog is time reversible") {
    const Trajectory tr = b.scene(0);
    std::vector<double> pos, vel;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < D; ++d) {
        pos.push_back(tr.state(0, n)[d]);
        vel.push_back(tr.state(0, n)[D + d]);
      }
    const auto p0 = pos, v0 = vel;
    const std::span<const double> q(b.charges.data(), N);
    leapfrog(pos, vel, q, 3, cfg.dt_fine, 100, cfg.coupling, cfg.softening);
    for (double& v : vel) v = -v;
    leapfrog(pos, vel, q, 3, cfg.dt_fine, 100, cfg.coupling, cfg.softening);
    for (std::size_t k = 0; k < pos.size(); ++k) {
      CHECK(std::abs(pos[k] - p0[k]) <= 1e-6);
      CHECK(std::abs(-vel[k] - v0[k]) <= 1e-6);
    }
  }
}

TEST_CASE("constant-velocity forecast") {
  Trajectory tr(2, 4, 1);
  for (std::size_t t = 0; t < 4; ++t) {
    const double k = static_cast<double>(t) * 0.5;
    double* x = tr.state(t, 0);
    x[0] = 1 + k * 2;
    x[1] = -1 + k * 0.5;
    x[2] = 2;
    x[3] = 0.5;
  }
  const Trajectory zero = constant_velocity_forecast(tr.slice(0, 2), 0, 0.5);
  REQUIRE(zero.steps == 1);
  for (int c = 0; c < 4; ++c) CHECK(zero.state(0, 0)[c] == tr.state(1, 0)[c]);
  const Trajectory fc = constant_velocity_forecast(tr.slice(0, 2), 2, 0.5);
  for (std::size_t k = 0; k < 3; ++k)
    for (int c = 0; c < 4; ++c) CHECK(std::abs(fc.state(k, 0)[c] - tr.state(k + 1, 0)[c]) < 1e-12);
  CHECK(constant_velocity_error(tr, 2, 2, 0.5) < 1e-12);
  CHECK_THROWS(constant_velocity_forecast(tr.slice(0, 0), 2, 0.5));

  SUBCASE("constant acceleration gives quadratic error growth") {
    const double a = 0.8, dt = 0.1;
    Trajectory acc(2, 12, 1);
    for (std::size_t t = 0; t < 12; ++t) {
      const double s = static_cast<double>(t) * dt;
      double* x = acc.state(t, 0);
      x[0] = 0.5 * a * s * s;
      x[1] = 0;
      x[2] = a * s;
      x[3] = 0;
    }
    const Trajectory f = constant_velocity_forecast(acc.slice(0, 1), 10, dt);
    for (std::size_t k = 1; k <= 10; ++k) {
      const double err = std::abs(f.state(k, 0)[0] - acc.state(k, 0)[0]);
      CHECK(std::abs(err - 0.5 * a * (k * dt) * (k * dt)) < 1e-12);
    }
  }
}

TEST_CASE("interactive subset") {
  const DatasetBundle fix = cv_fixture({1.4, 1.6});
  CHECK(std::abs(constant_velocity_error(fix.scene(0), 1, 2, 1.0) - 1.4) < 1e-12);
  CHECK(interactive_subset(fix, 1, 2, 1.5) == std::vector<std::size_t>{1});

  ChargedConfig zero;
  zero.zero_charges = true;
  // Free flight: constant velocity is exact up to round-off.
  CHECK(interactive_subset(gen_charged(zero, 5, 1), 25, 24, 1e-9).empty());

  // Only scenes 1 and 3 accelerate.
  CHECK(interactive_subset(cv_fixture({0.0, 0.3, 0.0, 2.0}), 1, 2, 0.0) == std::vector<std::size_t>{1, 3});
}

TEST_CASE("dataset files") {
  TempDir dir("data");
  const DatasetBundle synth = gen_synthetic({}, 7, 3, "test");
  const DatasetBundle charged = gen_charged({}, 3, 4);
  write_dataset(synth, dir.path / "s");
  write_dataset(charged, dir.path / "c");

  SUBCASE("round trips are bit-exact") {
    const DatasetBundle s = read_dataset(dir.path / "s");
    CHECK(s.trajectories == synth.trajectories);
    CHECK(s.edges == synth.edges);
    CHECK(s.meta.split == "test");
    const DatasetBundle c = read_dataset(dir.path / "c");
    CHECK(c.trajectories == charged.trajectories);
    CHECK(c.charges == charged.charges);
  }
  SUBCASE("header-only read") {
    std::filesystem::remove(dir.path / "s" / "trajectories.bin");
    const DatasetMeta m = read_dataset_meta(dir.path / "s");
    CHECK(m.scenes == 7);
    CHECK(m.kind == "synthetic");
  }
  SUBCASE("corrupted payload length") {
    const auto p = dir.path / "s" / "trajectories.bin";
    std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.put(static_cast<char>(0x07));
    f.close();
    CHECK_THROWS_AS(read_dataset(dir.path / "s"), FormatError);
  }
  SUBCASE("truncated payload") {
    const auto p = dir.path / "c" / "edges.bin";
    std::filesystem::resize_file(p, std::filesystem::file_size(p) - 1);
    CHECK_THROWS_AS(read_dataset(dir.path / "c"), FormatError);
  }
  SUBCASE("checksum mismatch") {
    const auto p = dir.path / "c" / "charges.bin";
    std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(20);
    f.put(static_cast<char>(0x5a));
    f.close();
    CHECK_THROWS_AS(read_dataset(dir.path / "c"), FormatError);
  }
  SUBCASE("malformed header") {
    std::ofstream(dir.path / "s" / "meta.json") << "{\"format\": \"locs-dataset\", \"version\": ";
    CHECK_THROWS_AS(read_dataset(dir.path / "s"), FormatError);
  }
}

TEST_CASE("subset keeps the listed scenes") {
  const DatasetBundle b = gen_synthetic({}, 5, 1);
  const std::vector<std::size_t> idx{3, 1};
  const DatasetBundle s = b.subset(idx);
  CHECK(s.meta.scenes == 2);
  CHECK(s.scene(0).data == b.scene(3).data);
  CHECK(s.scene(1).data == b.scene(1).data);
  CHECK_THROWS(b.subset(std::vector<std::size_t>{5}));
}
