// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic tactile optics: indentation height fields for the probe shapes,
// photometric rendering under three colored directional lights, lookup-table
// calibration that inverts shading back to surface gradients, and spectral
// Poisson integration of those gradients into a depth map.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taxel/image.hpp"

namespace taxel::optics {

/// Probe cross-sections pressed into the elastomer.
enum class ShapeKind { Circle, Square, Triangle, TShape };

const char* shape_name(ShapeKind kind);
ShapeKind shape_from_name(const std::string& name);

/// Three directional lights at fixed elevation, each emitting into a single
/// color channel, plus an achromatic ambient floor. Defaults keep every
/// rendered value inside (0, 1) so shading stays invertible.
struct LightingRig {
  double ambient = 0.25;
  double albedo = 0.6;
  double elevation_deg = 45.0;
  std::array<double, 3> azimuth_deg{0.0, 120.0, 240.0};

  /// Unit direction from the surface toward light `i`, as (x, y, z) with x
  /// along columns and y along rows.
  std::array<double, 3> light_dir(int i) const;
  void validate() const;
};

/// Per-pixel surface slopes dz/dx (columns) and dz/dy (rows), mm per mm.
struct GradientField {
  int height = 0;
  int width = 0;
  double pitch = 0.1;
  std::vector<double> gx, gy;

  static GradientField zeros(int h, int w, double pitch);
  double& gx_at(int r, int c) { return gx[static_cast<std::size_t>(r) * width + c]; }
  double& gy_at(int r, int c) { return gy[static_cast<std::size_t>(r) * width + c]; }
  double gx_at(int r, int c) const { return gx[static_cast<std::size_t>(r) * width + c]; }
  double gy_at(int r, int c) const { return gy[static_cast<std::size_t>(r) * width + c]; }
};

/// Shading-to-gradient lookup table binned over per-channel color deltas
/// relative to the flat-surface rendering. Every cell is resolved: cells
/// never hit during calibration inherit the value of the nearest populated
/// cell, so lookups are total.
struct CalibrationLut {
  int bins = 16;
  std::array<double, 3> lo{-1.0, -1.0, -1.0};  // fitted delta range per channel
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  std::vector<double> gx, gy;            // bins^3 resolved means
  std::vector<std::uint32_t> counts;     // raw calibration hits per cell

  std::size_t cell_count() const { return static_cast<std::size_t>(bins) * bins * bins; }
  std::size_t cell_index(const std::array<int, 3>& b) const {
    return (static_cast<std::size_t>(b[0]) * bins + b[1]) * bins + b[2];
  }
  std::array<int, 3> quantize(const std::array<double, 3>& delta) const;
  void validate() const;
};

/// Connected measurement of the indented area in a depth map.
struct ContactRegion {
  int pixel_count = 0;
  double area_mm2 = 0.0;
  double max_depth = 0.0;
};

/// Spherical indenter in the small-indentation limit: paraboloid cap
/// d(rho) = max(0, depth - rho^2 / radius), whose footprint radius is
/// exactly sqrt(radius * depth), matching the projected contact geometry.
HeightField height_field_sphere(double radius, double depth, int height, int width,
                                double pitch, double center_x_mm = 0.0,
                                double center_y_mm = 0.0);

/// Flat-bottomed prism of the given cross-section area pressed to `depth`,
/// with a raised-cosine rim of width `rim_mm` inside the boundary. The
/// nonzero footprint equals the cross-section exactly, so equal-area shapes
/// cover equal pixel counts.
HeightField height_field_prism(ShapeKind kind, double area_mm2, double depth,
                               double rim_mm, int height, int width, double pitch);

/// Forward differences with a zero pad on the far edge, the discrete
/// gradient whose inverse poisson_reconstruct computes exactly.
GradientField gradients_from_height(const HeightField& hf);

/// Lambertian shading of the gradient field under the rig. Channel c is
/// ambient + albedo * max(0, n . dir_c) with n = normalize(-gx, -gy, 1).
ImageRGB render_frame(const GradientField& g, const LightingRig& rig);

/// Channel value of an unindented flat surface; the reference every delta
/// is measured against.
double flat_level(const LightingRig& rig);

/// Builds the lookup table from rendered frames with known gradients.
/// The delta range is fitted to the calibration data with a small margin;
/// unvisited cells are filled from their nearest populated neighbor.
CalibrationLut calibrate_lut(const std::vector<ImageRGB>& frames,
                             const std::vector<GradientField>& gradients,
                             const LightingRig& rig, int bins = 16);

/// Gradient estimate for one color delta.
std::array<double, 2> lut_lookup(const CalibrationLut& lut,
                                 const std::array<double, 3>& delta);

/// Color deltas whose 2-norm falls below this are treated as non-contact
/// and decode to zero gradient.
inline constexpr double kContactMaskNorm = 0.03;

/// Per-pixel inversion of a frame back to surface gradients, measured
/// against an explicit reference frame.
GradientField gradients_from_frame(const ImageRGB& frame, const ImageRGB& reference,
                                   const CalibrationLut& lut, double pitch,
                                   double mask_norm = kContactMaskNorm);

/// Per-pixel inversion against the analytic flat level of the rig.
GradientField gradients_from_frame(const ImageRGB& frame, const LightingRig& rig,
                                   const CalibrationLut& lut, double pitch,
                                   double mask_norm = kContactMaskNorm);

void save_lut(const std::string& path, const CalibrationLut& lut);
CalibrationLut load_lut(const std::string& path);

/// Integrates gradients into a zero-mean depth map by solving the Poisson
/// equation laplacian(z) = div(g) with Neumann boundaries via cosine
/// transforms.
HeightField poisson_reconstruct(const GradientField& g);

/// Shifts a reconstruction so the border ring (assumed uncontacted) sits at
/// zero: subtracts the median of the outermost pixel ring.
HeightField rezero_to_border(const HeightField& hf);

/// Pixels at or above `threshold` mm. Empty optional when nothing reaches
/// the threshold; a no-contact frame is a valid measurement, not an error.
std::optional<ContactRegion> fit_contact_region(const HeightField& hf, double threshold);

/// Mean absolute difference normalized by the peak of the reference field.
double normalized_mae(const HeightField& recon, const HeightField& truth);

}  // namespace taxel::optics
