// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// Series-spring contact model for a press between an elastic object and the
// sensor elastomer: force synthesis, stiffness/hardness inversion from the
// temporal force gradient, and Hertz projected-contact geometry.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "taxel/common.hpp"

namespace taxel::contact {

/// Object and elastomer springs in series. Stiffnesses in N/mm.
struct SpringModel {
  double object_stiffness = 1.0;
  double elastomer_stiffness = 1.0;

  void validate() const;
};

/// Constant-speed, displacement-controlled press sampled on a uniform grid.
/// Total displacement ramps as speed * i * dt and, when press_depth is
/// finite, holds there for the rest of the window (ramp followed by dwell).
struct PressTrajectory {
  double speed = 0.5;             // mm/s
  double dt = 0.05;               // s
  int steps = 64;                 // samples, including t = 0
  double max_displacement = 2.0;  // linear-spring validity bound, mm
  double press_depth = std::numeric_limits<double>::infinity();  // hold level, mm

  double total_displacement(int i) const {
    return std::min(speed * dt * static_cast<double>(i), press_depth);
  }
  double duration() const { return dt * static_cast<double>(steps - 1); }
  void validate() const;
};

/// Uniformly sampled contact force F(i * dt) in newtons.
struct ForceSequence {
  double dt = 0.05;
  std::vector<double> force;

  double time_at(int i) const { return dt * static_cast<double>(i); }
  int size() const { return static_cast<int>(force.size()); }
  void validate() const;
};

/// Sphere-on-plane press: indenter radius and indentation depth, mm.
struct HertzContact {
  double sphere_radius = 1.0;
  double indentation = 0.0;

  void validate() const;
};

/// One reconstruction-accuracy data point: theoretical vs measured projected
/// contact area, mm^2.
struct ReconEval {
  double theoretical_area = 0.0;  // from Hertz geometry
  double measured_area = 0.0;     // from the reconstructed depth map
};

/// Total stiffness of springs in series: (sum 1/k_i)^-1. Never exceeds the
/// softest spring.
double series_stiffness(std::span<const double> stiffnesses);

/// Inverts the series combination for the object spring:
/// 1/k_obj = 1/k_total - 1/k_elastomer. Throws InfeasibleModelError when
/// k_total >= k_elastomer, which no physical object stiffness can produce.
double object_stiffness(double total_stiffness, double elastomer_stiffness);

/// F(t) = k_total * speed * t, an exact linear ramp. When noise_sigma_frac
/// is positive, adds seeded Gaussian noise with sigma expressed as a
/// fraction of the sequence's full-scale (final ramp) force; the t = 0
/// sample stays exactly zero (force is tared at contact onset).
ForceSequence synth_force_sequence(const SpringModel& model, const PressTrajectory& traj,
                                   double noise_sigma_frac = 0.0, std::uint64_t seed = 0);

/// dF/dt, central differences on interior samples and one-sided at the two
/// ends. Exact for affine F(t). Requires at least 3 samples.
std::vector<double> force_gradient(const ForceSequence& seq);

/// Estimates the object stiffness from a monotone press: averages dF/dt over
/// the interior window (first and last trim_frac of samples discarded),
/// divides by the press speed to get k_total, then inverts the series model.
double infer_stiffness(const ForceSequence& seq, double press_speed,
                       double elastomer_stiffness, double trim_frac = 0.1);

/// Shore-A hardness from object stiffness: H = k / slope.
double hardness_from_stiffness(double object_stiffness, double hardness_slope);

/// Inverse map used for dataset generation: k = slope * H.
double stiffness_from_hardness(double hardness, double hardness_slope);

/// Hertz projected-contact radius r = sqrt(R * Z).
double hertz_radius(const HertzContact& c);

/// Hertz projected-contact area S = pi * R * Z.
double hertz_area(const HertzContact& c);

}  // namespace taxel::contact
