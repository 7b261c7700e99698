// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "taxel/common.hpp"
#include "taxel/contact.hpp"

using namespace taxel;
using namespace taxel::contact;

TEST_SUITE_BEGIN("contact");

TEST_CASE("series stiffness of a single spring is that spring") {
  const std::array ks{5.0};
  CHECK(series_stiffness(ks) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("series stiffness of two equal springs halves") {
  const std::array ks{2.0, 2.0};
  CHECK(series_stiffness(ks) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("series stiffness of 3 and 6 is 2") {
  const std::array ks{3.0, 6.0};
  CHECK(series_stiffness(ks) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("series stiffness is permutation invariant") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> ks;
    const int n = 1 + static_cast<int>(rng.bounded(5));
    for (int i = 0; i < n; ++i) ks.push_back(rng.uniform(0.1, 20.0));
    const double before = series_stiffness(ks);
    rng.shuffle(ks);
    CHECK(series_stiffness(ks) == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("appending a spring never increases series stiffness") {
  Rng rng(102);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> ks{rng.uniform(0.1, 20.0)};
    double prev = series_stiffness(ks);
    for (int i = 0; i < 4; ++i) {
      ks.push_back(rng.uniform(0.1, 20.0));
      const double cur = series_stiffness(ks);
      CHECK(cur <= prev + 1e-12);
      CHECK(cur <= *std::min_element(ks.begin(), ks.end()) + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("object stiffness inverts the series combination") {
  CHECK(object_stiffness(2.0, 6.0) == doctest::Approx(3.0).epsilon(1e-12));
  const double k2 = 12.0;
  CHECK(object_stiffness(k2 / 2.0, k2) == doctest::Approx(k2).epsilon(1e-12));
}

TEST_CASE("object stiffness rejects total >= elastomer") {
  CHECK_THROWS_AS(object_stiffness(1.0, 1.0), InfeasibleModelError);
  CHECK_THROWS_AS(object_stiffness(5.0, 4.0), InfeasibleModelError);
}

TEST_CASE("series then invert round-trips the object spring") {
  Rng rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const double k1 = rng.uniform(0.5, 30.0);
    const double k2 = rng.uniform(0.5, 30.0);
    const std::array ks{k1, k2};
    const double kt = series_stiffness(ks);
    CHECK(object_stiffness(kt, k2) == doctest::Approx(k1).epsilon(1e-9));
  }
}

TEST_CASE("synthesized force is an exact linear ramp") {
  SpringModel m{.object_stiffness = 10.0, .elastomer_stiffness = 10.0};
  PressTrajectory traj{.speed = 0.5, .dt = 0.05, .steps = 41, .max_displacement = 2.0};
  const ForceSequence seq = synth_force_sequence(m, traj);
  CHECK(seq.force.front() == doctest::Approx(0.0).epsilon(1e-15));
  // k_total = 5, F(2 s) = 5 * 0.5 * 2 = 5 N at sample 40.
  CHECK(seq.force[40] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(seq.force[20] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("a rigid object leaves only the elastomer spring") {
  SpringModel m{.object_stiffness = 1e12, .elastomer_stiffness = 4.0};
  PressTrajectory traj{.speed = 0.5, .dt = 0.05, .steps = 21, .max_displacement = 2.0};
  const ForceSequence seq = synth_force_sequence(m, traj);
  // x_total = 0.5 mm at the last sample; F -> k2 * x_total = 2 N.
  CHECK(seq.force.back() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("noise-free force is monotone nondecreasing") {
  Rng rng(104);
  for (int trial = 0; trial < 30; ++trial) {
    SpringModel m{.object_stiffness = rng.uniform(0.5, 20.0),
                  .elastomer_stiffness = rng.uniform(0.5, 20.0)};
    PressTrajectory traj{.speed = 0.5, .dt = 0.05, .steps = 40, .max_displacement = 2.0};
    const ForceSequence seq = synth_force_sequence(m, traj);
    for (int i = 1; i < seq.size(); ++i)
      CHECK(seq.force[static_cast<std::size_t>(i)] >=
            seq.force[static_cast<std::size_t>(i - 1)]);
  }
}

TEST_CASE("a softer object produces lower force at every time") {
  PressTrajectory traj{.speed = 0.5, .dt = 0.05, .steps = 40, .max_displacement = 2.0};
  SpringModel soft{.object_stiffness = 2.0, .elastomer_stiffness = 12.0};
  SpringModel hard{.object_stiffness = 16.0, .elastomer_stiffness = 12.0};
  const ForceSequence fs = synth_force_sequence(soft, traj);
  const ForceSequence fh = synth_force_sequence(hard, traj);
  for (int i = 1; i < fs.size(); ++i)
    CHECK(fs.force[static_cast<std::size_t>(i)] < fh.force[static_cast<std::size_t>(i)]);
}

TEST_CASE("noisy sequences are seeded and keep the zero tare") {
  SpringModel m{.object_stiffness = 8.0, .elastomer_stiffness = 12.0};
  PressTrajectory traj{.speed = 0.5, .dt = 0.05, .steps = 40, .max_displacement = 2.0};
  const ForceSequence a = synth_force_sequence(m, traj, 0.01, 5);
  const ForceSequence b = synth_force_sequence(m, traj, 0.01, 5);
  const ForceSequence c = synth_force_sequence(m, traj, 0.01, 6);
  CHECK(a.force == b.force);
  CHECK(a.force != c.force);
  CHECK(a.force.front() == 0.0);
}

TEST_CASE("gradient of a linear ramp is the slope everywhere") {
  ForceSequence seq;
  seq.dt = 0.1;
  for (int i = 0; i < 30; ++i) seq.force.push_back(3.0 * seq.time_at(i));
  for (double g : force_gradient(seq)) CHECK(g == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("gradient matches hand-computed finite differences") {
  ForceSequence seq{.dt = 1.0, .force = {0.0, 0.1, 0.4, 0.9}};
  const std::vector<double> g = force_gradient(seq);
  REQUIRE(g.size() == 4);
  CHECK(g[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(g[3] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("stiffness inference round-trips exactly without noise") {
  Rng rng(105);
  for (int trial = 0; trial < 50; ++trial) {
    const double k2 = 12.0;
    SpringModel m{.object_stiffness = rng.uniform(1.0, 20.0), .elastomer_stiffness = k2};
    PressTrajectory traj{.speed = 0.5, .dt = 0.05, .steps = 64, .max_displacement = 2.0};
    const ForceSequence seq = synth_force_sequence(m, traj);
    const double k1 = infer_stiffness(seq, traj.speed, k2);
    CHECK(std::abs(k1 - m.object_stiffness) < 1e-9);
  }
}

TEST_CASE("stiffness inference tolerates 1 percent force noise") {
  const double k2 = 12.0;
  SpringModel m{.object_stiffness = 10.0, .elastomer_stiffness = k2};
  PressTrajectory traj{.speed = 0.5, .dt = 0.05, .steps = 64, .max_displacement = 2.0};
  double total_rel = 0.0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    const ForceSequence seq =
        synth_force_sequence(m, traj, 0.01, static_cast<std::uint64_t>(t) + 1);
    const double k1 = infer_stiffness(seq, traj.speed, k2);
    const double rel = std::abs(k1 - m.object_stiffness) / m.object_stiffness;
    CHECK(rel < 0.10);
    total_rel += rel;
  }
  CHECK(total_rel / trials < 0.05);
}

TEST_CASE("hardness maps linearly to stiffness and back") {
  CHECK(hardness_from_stiffness(10.0, 0.2) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(stiffness_from_hardness(50.0, 0.2) == doctest::Approx(10.0).epsilon(1e-12));
  Rng rng(106);
  for (int trial = 0; trial < 50; ++trial) {
    const double h = rng.uniform(5.0, 90.0);
    const double slope = rng.uniform(0.05, 1.0);
    CHECK(hardness_from_stiffness(stiffness_from_hardness(h, slope), slope) ==
          doctest::Approx(h).epsilon(1e-9));
  }
}

TEST_CASE("hertz contact radius and area match the sphere geometry") {
  HertzContact c{.sphere_radius = 5.0, .indentation = 0.8};
  CHECK(hertz_radius(c) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(hertz_area(c) == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("hertz area equals pi times radius squared") {
  Rng rng(107);
  for (int trial = 0; trial < 50; ++trial) {
    HertzContact c{.sphere_radius = rng.uniform(0.5, 10.0), .indentation = rng.uniform(0.0, 2.0)};
    const double r = hertz_radius(c);
    CHECK(hertz_area(c) == doctest::Approx(std::numbers::pi * r * r).epsilon(1e-9));
  }
}

TEST_CASE("trajectory validation rejects presses past the model bound") {
  PressTrajectory traj{.speed = 1.0, .dt = 0.1, .steps = 64, .max_displacement = 2.0};
  CHECK_THROWS_AS(traj.validate(), std::invalid_argument);
}

TEST_SUITE_END();
