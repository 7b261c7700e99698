// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/contact.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace taxel::contact {

void SpringModel::validate() const {
  if (!(object_stiffness > 0.0) || !std::isfinite(object_stiffness))
    throw std::invalid_argument("SpringModel: object_stiffness must be finite and > 0");
  if (!(elastomer_stiffness > 0.0) || !std::isfinite(elastomer_stiffness))
    throw std::invalid_argument("SpringModel: elastomer_stiffness must be finite and > 0");
}

void PressTrajectory::validate() const {
  if (!(speed > 0.0) || !std::isfinite(speed))
    throw std::invalid_argument("PressTrajectory: speed must be finite and > 0");
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("PressTrajectory: dt must be finite and > 0");
  if (steps < 2) throw std::invalid_argument("PressTrajectory: steps must be >= 2");
  if (!(max_displacement > 0.0))
    throw std::invalid_argument("PressTrajectory: max_displacement must be > 0");
  if (!(press_depth > 0.0))
    throw std::invalid_argument("PressTrajectory: press_depth must be > 0");
  if (total_displacement(steps - 1) > max_displacement + 1e-12)
    throw std::invalid_argument("PressTrajectory: final displacement " +
                                std::to_string(total_displacement(steps - 1)) +
                                " mm exceeds max_displacement");
}

void ForceSequence::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("ForceSequence: dt must be finite and > 0");
  if (force.size() < 2) throw std::invalid_argument("ForceSequence: need at least 2 samples");
  for (double f : force)
    if (!std::isfinite(f)) throw std::invalid_argument("ForceSequence: non-finite sample");
}

void HertzContact::validate() const {
  if (!(sphere_radius > 0.0) || !std::isfinite(sphere_radius))
    throw std::invalid_argument("HertzContact: sphere_radius must be finite and > 0");
  if (indentation < 0.0 || !std::isfinite(indentation))
    throw std::invalid_argument("HertzContact: indentation must be finite and >= 0");
}

double series_stiffness(std::span<const double> stiffnesses) {
  if (stiffnesses.empty())
    throw std::invalid_argument("series_stiffness: need at least one spring");
  double inv_sum = 0.0;
  for (double k : stiffnesses) {
    if (!(k > 0.0) || !std::isfinite(k))
      throw std::invalid_argument("series_stiffness: stiffnesses must be finite and > 0");
    inv_sum += 1.0 / k;
  }
  return 1.0 / inv_sum;
}

double object_stiffness(double total_stiffness, double elastomer_stiffness) {
  if (!(total_stiffness > 0.0) || !std::isfinite(total_stiffness))
    throw std::invalid_argument("object_stiffness: total_stiffness must be finite and > 0");
  if (!(elastomer_stiffness > 0.0) || !std::isfinite(elastomer_stiffness))
    throw std::invalid_argument("object_stiffness: elastomer_stiffness must be finite and > 0");
  if (total_stiffness >= elastomer_stiffness)
    throw InfeasibleModelError(
        "object_stiffness: total stiffness " + std::to_string(total_stiffness) +
        " must be below the elastomer stiffness " + std::to_string(elastomer_stiffness));
  return 1.0 / (1.0 / total_stiffness - 1.0 / elastomer_stiffness);
}

ForceSequence synth_force_sequence(const SpringModel& model, const PressTrajectory& traj,
                                   double noise_sigma_frac, std::uint64_t seed) {
  model.validate();
  traj.validate();
  if (noise_sigma_frac < 0.0 || !std::isfinite(noise_sigma_frac))
    throw std::invalid_argument("synth_force_sequence: noise_sigma_frac must be finite and >= 0");

  const double k_total =
      series_stiffness(std::array{model.object_stiffness, model.elastomer_stiffness});
  ForceSequence seq;
  seq.dt = traj.dt;
  seq.force.resize(static_cast<std::size_t>(traj.steps));
  for (int i = 0; i < traj.steps; ++i)
    seq.force[static_cast<std::size_t>(i)] = k_total * traj.total_displacement(i);

  if (noise_sigma_frac > 0.0) {
    const double sigma = noise_sigma_frac * seq.force.back();
    Rng rng(seed);
    for (int i = 1; i < traj.steps; ++i)
      seq.force[static_cast<std::size_t>(i)] += sigma * rng.normal();
  }
  return seq;
}

std::vector<double> force_gradient(const ForceSequence& seq) {
  seq.validate();
  const int n = seq.size();
  if (n < 3) throw std::invalid_argument("force_gradient: need at least 3 samples");
  std::vector<double> grad(static_cast<std::size_t>(n));
  const auto& f = seq.force;
  grad.front() = (f[1] - f[0]) / seq.dt;
  for (int i = 1; i + 1 < n; ++i)
    grad[static_cast<std::size_t>(i)] =
        (f[static_cast<std::size_t>(i + 1)] - f[static_cast<std::size_t>(i - 1)]) / (2.0 * seq.dt);
  grad.back() = (f[static_cast<std::size_t>(n - 1)] - f[static_cast<std::size_t>(n - 2)]) / seq.dt;
  return grad;
}

double infer_stiffness(const ForceSequence& seq, double press_speed,
                       double elastomer_stiffness, double trim_frac) {
  if (!(press_speed > 0.0) || !std::isfinite(press_speed))
    throw std::invalid_argument("infer_stiffness: press_speed must be finite and > 0");
  if (trim_frac < 0.0 || trim_frac >= 0.5)
    throw std::invalid_argument("infer_stiffness: trim_frac must be in [0, 0.5)");

  const std::vector<double> grad = force_gradient(seq);
  const int n = static_cast<int>(grad.size());
  const int trim = static_cast<int>(std::floor(trim_frac * static_cast<double>(n)));
  const int lo = trim;
  const int hi = n - trim;  // exclusive
  if (hi - lo < 1) throw std::invalid_argument("infer_stiffness: window empty after trimming");

  double sum = 0.0;
  for (int i = lo; i < hi; ++i) sum += grad[static_cast<std::size_t>(i)];
  const double k_total = sum / static_cast<double>(hi - lo) / press_speed;
  if (!(k_total > 0.0))
    throw InfeasibleModelError("infer_stiffness: non-positive force slope, not a press");
  return object_stiffness(k_total, elastomer_stiffness);
}

double hardness_from_stiffness(double object_stiffness, double hardness_slope) {
  if (!(hardness_slope > 0.0) || !std::isfinite(hardness_slope))
    throw std::invalid_argument("hardness_from_stiffness: hardness_slope must be finite and > 0");
  if (!(object_stiffness > 0.0) || !std::isfinite(object_stiffness))
    throw std::invalid_argument("hardness_from_stiffness: object_stiffness must be finite and > 0");
  return object_stiffness / hardness_slope;
}

double stiffness_from_hardness(double hardness, double hardness_slope) {
  if (!(hardness_slope > 0.0) || !std::isfinite(hardness_slope))
    throw std::invalid_argument("stiffness_from_hardness: hardness_slope must be finite and > 0");
  if (!(hardness > 0.0) || !std::isfinite(hardness))
    throw std::invalid_argument("stiffness_from_hardness: hardness must be finite and > 0");
  return hardness * hardness_slope;
}

double hertz_radius(const HertzContact& c) {
  c.validate();
  return std::sqrt(c.sphere_radius * c.indentation);
}

double hertz_area(const HertzContact& c) {
  c.validate();
  return std::numbers::pi * c.sphere_radius * c.indentation;
}

}  // namespace taxel::contact
