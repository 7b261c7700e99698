// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic press datasets: a seeded scenario grid couples the spring
// contact model to the tactile optics so every sample carries frames, a
// force window, a reconstructed depth map, and labels. Generation is
// deterministic per (config, seed) and writes a schema-versioned manifest
// next to per-sample artifact directories.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taxel/contact.hpp"
#include "taxel/image.hpp"
#include "taxel/nn.hpp"
#include "taxel/optics.hpp"

namespace taxel::dataset {

inline constexpr int kSchemaVersion = 1;

/// Full-scale force used to normalize network inputs, newtons.
inline constexpr double kForceFullScaleN = 12.0;

enum class DatasetKind { Classification, ForceRegression };

const char* dataset_kind_name(DatasetKind kind);
DatasetKind dataset_kind_from_name(const std::string& name);

/// Which label a classification run trains against.
enum class Task { Shape, Hardness, Joint };

const char* task_name(Task task);
Task task_from_name(const std::string& name);

struct GenConfig {
  DatasetKind kind = DatasetKind::Classification;

  // Scenario grid (classification): shapes x hardness x depths x reps.
  int hardness_levels = 8;
  double hardness_min_ha = 10.0;
  double hardness_max_ha = 80.0;
  std::vector<double> depths_mm{0.2, 0.4, 0.6, 0.8, 1.0};
  int reps = 5;

  // Force-regression draws: rigid-probe presses with uniform imprints.
  int regression_samples = 900;
  double regression_max_imprint_mm = 1.0;

  // Contact mechanics.
  double elastomer_stiffness = 12.0;  // N/mm
  double hardness_slope = 0.2;        // N/mm per HA, k1 = slope * H
  double speed = 0.5;                 // mm/s
  double dt = 0.05;                   // force sampling period, s
  int force_len = 64;                 // force window samples (ramp + dwell)
  double frame_hz = 10.0;             // frame rate during the press
  double max_displacement = 2.0;      // linear regime bound, mm
  double force_noise_frac = 0.01;     // sigma relative to the final force

  // Tactile optics.
  int image_size = 64;
  double pitch_mm = 0.1;
  double area_mm2 = 7.0;   // equal cross-section for every shape
  double rim_mm = 0.4;
  double image_noise = 0.005;  // per-channel sigma in image units
  int lut_bins = 16;

  // Split fractions; test takes the rest.
  double train_frac = 0.7;
  double val_frac = 0.15;

  void validate() const;
};

/// Parses a config from JSON text. Missing keys keep defaults; unknown keys
/// are rejected.
GenConfig gen_config_from_json(const std::string& text);

/// Serializes every field plus the schema version, stable key order.
std::string gen_config_to_json(const GenConfig& config);

/// One cell of the classification grid.
struct Scenario {
  int index = 0;
  optics::ShapeKind shape = optics::ShapeKind::Circle;
  int shape_id = 0;
  int hardness_id = 0;
  double hardness_ha = 0.0;
  double object_stiffness = 0.0;  // k1, N/mm
  int depth_id = 0;
  double depth_mm = 0.0;  // commanded total displacement
  int rep = 0;
  std::uint64_t seed = 0;
};

/// Shape-major deterministic grid; per-scenario seeds derive from the master.
std::vector<Scenario> scenario_grid(const GenConfig& config, std::uint64_t master_seed);

/// Lookup table fitted to clean spherical presses rendered at the dataset
/// raster. The sphere sweep spans gentle to steep slopes so prism rims at
/// the deepest configured imprint stay inside the fitted range.
optics::CalibrationLut build_calibration_lut(int image_size, double pitch_mm, int lut_bins);

/// In-memory result of pressing one scenario: quantized frames at frame_hz
/// over the ramp, the force window (ramp then dwell), and the ground-truth
/// final imprint.
struct PressSim {
  contact::ForceSequence force;       // length config.force_len, noisy
  std::vector<ImageRGB> frames;       // frames[0] is the non-contact reference
  HeightField truth_depth;            // final elastomer imprint, mm
  double imprint_mm = 0.0;            // commanded_depth * k1 / (k1 + k2)
  double t_press_s = 0.0;             // ramp duration
  int ramp_samples = 0;               // force samples covering the ramp
};

/// Simulates one press. The elastomer sees x2 = x_total * k1 / (k1 + k2);
/// force is k_total * speed * t during the ramp and holds at the plateau.
PressSim simulate_press(const GenConfig& config, optics::ShapeKind shape,
                        double object_stiffness, double depth_mm, std::uint64_t seed);

/// First and last indices of a frame window; the window needs >= 2 frames.
std::pair<int, int> select_frame_pair(int n_frames);

/// Linear resampling onto out_len uniform points; endpoints are preserved.
std::vector<double> resample_linear(std::span<const double> values, int out_len);

/// Force-window CSV with a `t,F` header, one full-precision row per sample.
void write_force_csv(const std::string& path, const contact::ForceSequence& seq);
contact::ForceSequence read_force_csv(const std::string& path);

struct SampleMeta {
  std::string id;
  std::string dir;  // relative to the dataset root
  int shape_id = 0;
  int hardness_id = 0;
  int joint_id = 0;
  double hardness_ha = 0.0;
  int depth_id = 0;
  double depth_mm = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;
  std::string split;
  int n_frames = 0;
  double imprint_mm = 0.0;
  double object_stiffness = 0.0;
  double t_press_s = 0.0;
  // Hand-crafted features for the manual baseline.
  double baseline_radius_mm = 0.0;
  double baseline_stiffness = 0.0;
  // Force regression target.
  double target_force_n = 0.0;
};

struct Normalization {
  double depth_mean = 0.0, depth_std = 1.0;
  double gx_mean = 0.0, gx_std = 1.0;
  double gy_mean = 0.0, gy_std = 1.0;
};

struct Manifest {
  int schema_version = kSchemaVersion;
  DatasetKind kind = DatasetKind::Classification;
  std::uint64_t seed = 0;
  int image_size = 0;
  double pitch_mm = 0.0;
  int force_len = 0;
  double dt = 0.0;
  double area_mm2 = 0.0;
  double force_full_scale_n = kForceFullScaleN;
  std::vector<std::string> shape_names;
  std::vector<double> hardness_levels_ha;
  std::vector<double> depths_mm;
  std::optional<Normalization> normalization;  // absent in truncated manifests
  std::vector<SampleMeta> samples;

  int num_classes(Task task) const;
  int label(const SampleMeta& s, Task task) const;
};

/// Generates a dataset into out_dir (created; must be missing or empty).
/// Returns the manifest. Per-sample work is parallel over `jobs`; artifacts
/// and the manifest are byte-identical for identical (config, seed).
/// On a mid-run failure a truncated but valid manifest is still written.
Manifest generate_dataset(const GenConfig& config, const std::string& out_dir,
                          std::uint64_t seed, int jobs = 1);

Manifest load_manifest(const std::string& dir);

/// Dataset loaded into memory with normalized network inputs.
class Dataset {
 public:
  static Dataset load(const std::string& dir);

  const Manifest& manifest() const { return manifest_; }
  int size() const { return static_cast<int>(manifest_.samples.size()); }
  std::vector<int> split_indices(const std::string& split) const;

  /// [N, 3, S, S]: standardized depth, gx, gy channels (classification).
  nn::Tensor depth_batch(std::span<const int> idx) const;
  /// [N, 1, T]: force window over the full scale (classification).
  nn::Tensor force_batch(std::span<const int> idx) const;
  /// [N, 3, S, S]: press-minus-reference difference (force regression).
  nn::Tensor diff_batch(std::span<const int> idx) const;
  /// Regression targets in newtons.
  std::vector<double> targets(std::span<const int> idx) const;
  std::vector<int> labels(std::span<const int> idx, Task task) const;

 private:
  Manifest manifest_;
  std::size_t sample_stride_ = 0;     // doubles per sample image block
  std::size_t force_stride_ = 0;
  std::vector<double> image_data_;    // normalized depth/gx/gy or raw diff
  std::vector<double> force_data_;    // normalized force windows
  std::vector<double> targets_;       // regression targets, newtons
};

}  // namespace taxel::dataset
