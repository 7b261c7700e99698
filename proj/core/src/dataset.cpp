// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/dataset.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace taxel::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<optics::ShapeKind, 4> kShapes{
    optics::ShapeKind::Circle, optics::ShapeKind::Square, optics::ShapeKind::Triangle,
    optics::ShapeKind::TShape};

// The steepest calibration sphere must cover the steepest rim slope the
// prisms can produce, pi * depth / (2 * rim) at the deepest imprint.
constexpr std::array<double, 4> kCalibrationRadii{4.0, 1.5, 0.8, 0.45};
constexpr std::array<double, 4> kCalibrationDepths{0.3, 0.6, 0.9, 1.2};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ImageRGB add_noise_and_quantize(ImageRGB img, double sigma, Rng& rng) {
  if (sigma > 0.0)
    for (double& v : img.data) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
  return quantize_roundtrip(img);
}

json meta_to_json(const SampleMeta& s, DatasetKind kind) {
  json j;
  j["id"] = s.id;
  j["dir"] = s.dir;
  j["shape"] = optics::shape_name(kShapes[static_cast<std::size_t>(s.shape_id)]);
  j["shape_id"] = s.shape_id;
  j["seed"] = s.seed;
  j["split"] = s.split;
  j["n_frames"] = s.n_frames;
  j["imprint_mm"] = s.imprint_mm;
  if (kind == DatasetKind::Classification) {
    j["hardness_id"] = s.hardness_id;
    j["hardness_ha"] = s.hardness_ha;
    j["joint_id"] = s.joint_id;
    j["depth_id"] = s.depth_id;
    j["depth_mm"] = s.depth_mm;
    j["rep"] = s.rep;
    j["object_stiffness"] = s.object_stiffness;
    j["t_press_s"] = s.t_press_s;
    j["baseline_radius_mm"] = s.baseline_radius_mm;
    j["baseline_stiffness"] = s.baseline_stiffness;
  } else {
    j["target_force_n"] = s.target_force_n;
  }
  return j;
}

SampleMeta meta_from_json(const json& j, DatasetKind kind) {
  SampleMeta s;
  s.id = j.at("id").get<std::string>();
  s.dir = j.at("dir").get<std::string>();
  s.shape_id = j.at("shape_id").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.split = j.at("split").get<std::string>();
  s.n_frames = j.at("n_frames").get<int>();
  s.imprint_mm = j.at("imprint_mm").get<double>();
  if (kind == DatasetKind::Classification) {
    s.hardness_id = j.at("hardness_id").get<int>();
    s.hardness_ha = j.at("hardness_ha").get<double>();
    s.joint_id = j.at("joint_id").get<int>();
    s.depth_id = j.at("depth_id").get<int>();
    s.depth_mm = j.at("depth_mm").get<double>();
    s.rep = j.at("rep").get<int>();
    s.object_stiffness = j.at("object_stiffness").get<double>();
    s.t_press_s = j.at("t_press_s").get<double>();
    s.baseline_radius_mm = j.at("baseline_radius_mm").get<double>();
    s.baseline_stiffness = j.at("baseline_stiffness").get<double>();
  } else {
    s.target_force_n = j.at("target_force_n").get<double>();
  }
  return s;
}

json manifest_to_json(const Manifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["kind"] = dataset_kind_name(m.kind);
  j["seed"] = m.seed;
  j["image_size"] = m.image_size;
  j["pitch_mm"] = m.pitch_mm;
  j["force_len"] = m.force_len;
  j["dt_s"] = m.dt;
  j["area_mm2"] = m.area_mm2;
  j["force_full_scale_n"] = m.force_full_scale_n;
  j["shape_names"] = m.shape_names;
  j["hardness_levels_ha"] = m.hardness_levels_ha;
  j["depths_mm"] = m.depths_mm;
  if (m.normalization) {
    const Normalization& n = *m.normalization;
    j["normalization"] = {{"depth_mean", n.depth_mean}, {"depth_std", n.depth_std},
                          {"gx_mean", n.gx_mean},       {"gx_std", n.gx_std},
                          {"gy_mean", n.gy_mean},       {"gy_std", n.gy_std}};
  } else {
    j["normalization"] = nullptr;
  }
  json counts = json::object();
  for (const char* split : {"train", "val", "test"})
    counts[split] = std::count_if(m.samples.begin(), m.samples.end(),
                                  [&](const SampleMeta& s) { return s.split == split; });
  j["splits"] = counts;
  json samples = json::array();
  for (const SampleMeta& s : m.samples) samples.push_back(meta_to_json(s, m.kind));
  j["samples"] = samples;
  return j;
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != kSchemaVersion)
    throw std::runtime_error("manifest schema version " + std::to_string(m.schema_version) +
                             " unsupported");
  m.kind = dataset_kind_from_name(j.at("kind").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.image_size = j.at("image_size").get<int>();
  m.pitch_mm = j.at("pitch_mm").get<double>();
  m.force_len = j.at("force_len").get<int>();
  m.dt = j.at("dt_s").get<double>();
  m.area_mm2 = j.at("area_mm2").get<double>();
  m.force_full_scale_n = j.at("force_full_scale_n").get<double>();
  m.shape_names = j.at("shape_names").get<std::vector<std::string>>();
  m.hardness_levels_ha = j.at("hardness_levels_ha").get<std::vector<double>>();
  m.depths_mm = j.at("depths_mm").get<std::vector<double>>();
  if (!j.at("normalization").is_null()) {
    const json& n = j.at("normalization");
    Normalization norm;
    norm.depth_mean = n.at("depth_mean").get<double>();
    norm.depth_std = n.at("depth_std").get<double>();
    norm.gx_mean = n.at("gx_mean").get<double>();
    norm.gx_std = n.at("gx_std").get<double>();
    norm.gy_mean = n.at("gy_mean").get<double>();
    norm.gy_std = n.at("gy_std").get<double>();
    m.normalization = norm;
  }
  for (const json& js : j.at("samples")) m.samples.push_back(meta_from_json(js, m.kind));
  return m;
}

/// Largest-remainder split of n per-class samples into train/val/test.
std::array<int, 3> split_counts(int n, double train_frac, double val_frac) {
  const std::array<double, 3> fracs{train_frac, val_frac, 1.0 - train_frac - val_frac};
  std::array<int, 3> counts{};
  std::array<double, 3> rem{};
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = fracs[static_cast<std::size_t>(k)] * n;
    counts[static_cast<std::size_t>(k)] = static_cast<int>(std::floor(exact));
    rem[static_cast<std::size_t>(k)] = exact - std::floor(exact);
    assigned += counts[static_cast<std::size_t>(k)];
  }
  while (assigned < n) {
    // Largest remainder; near-ties (ulp noise in the fraction arithmetic)
    // resolve toward the later split so test never starves before val.
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (rem[static_cast<std::size_t>(k)] >= rem[static_cast<std::size_t>(best)] - 1e-9)
        best = k;
    ++counts[static_cast<std::size_t>(best)];
    rem[static_cast<std::size_t>(best)] = -2.0;
    ++assigned;
  }
  return counts;
}

const char* split_of_rank(int rank, const std::array<int, 3>& counts) {
  if (rank < counts[0]) return "train";
  if (rank < counts[0] + counts[1]) return "val";
  return "test";
}

}  // namespace

void write_force_csv(const std::string& path, const contact::ForceSequence& seq) {
  std::string text = "t,F\n";
  for (int i = 0; i < seq.size(); ++i) {
    text += format_double(seq.time_at(i));
    text += ',';
    text += format_double(seq.force[static_cast<std::size_t>(i)]);
    text += '\n';
  }
  write_text_file(path, text);
}

contact::ForceSequence read_force_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "t,F")
    throw std::runtime_error("force csv missing t,F header: " + path);
  contact::ForceSequence seq;
  double t0 = 0.0, t1 = 0.0;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("force csv row missing comma: " + path);
    const double t = std::stod(line.substr(0, comma));
    if (row == 0) t0 = t;
    if (row == 1) t1 = t;
    seq.force.push_back(std::stod(line.substr(comma + 1)));
    ++row;
  }
  if (row >= 2) seq.dt = t1 - t0;
  return seq;
}

const char* dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Classification: return "classification";
    case DatasetKind::ForceRegression: return "force_regression";
  }
  throw std::invalid_argument("dataset_kind_name: unknown kind");
}

DatasetKind dataset_kind_from_name(const std::string& name) {
  if (name == "classification") return DatasetKind::Classification;
  if (name == "force_regression") return DatasetKind::ForceRegression;
  throw std::invalid_argument("dataset_kind_from_name: unknown kind \"" + name + "\"");
}

const char* task_name(Task task) {
  switch (task) {
    case Task::Shape: return "shape";
    case Task::Hardness: return "hardness";
    case Task::Joint: return "joint";
  }
  throw std::invalid_argument("task_name: unknown task");
}

Task task_from_name(const std::string& name) {
  if (name == "shape") return Task::Shape;
  if (name == "hardness") return Task::Hardness;
  if (name == "joint") return Task::Joint;
  throw std::invalid_argument("task_from_name: unknown task \"" + name + "\"");
}

void GenConfig::validate() const {
  if (hardness_levels < 1) throw std::invalid_argument("GenConfig: hardness_levels must be >= 1");
  if (!(hardness_min_ha > 0.0) || !(hardness_max_ha >= hardness_min_ha))
    throw std::invalid_argument("GenConfig: hardness range must satisfy 0 < min <= max");
  if (depths_mm.empty()) throw std::invalid_argument("GenConfig: depths_mm must not be empty");
  for (double d : depths_mm)
    if (!(d > 0.0) || d > max_displacement)
      throw std::invalid_argument("GenConfig: depths must lie in (0, max_displacement]");
  if (reps < 1) throw std::invalid_argument("GenConfig: reps must be >= 1");
  if (regression_samples < 1)
    throw std::invalid_argument("GenConfig: regression_samples must be >= 1");
  if (!(regression_max_imprint_mm > 0.0))
    throw std::invalid_argument("GenConfig: regression_max_imprint_mm must be > 0");
  if (!(elastomer_stiffness > 0.0) || !(hardness_slope > 0.0))
    throw std::invalid_argument("GenConfig: stiffness parameters must be > 0");
  if (!(speed > 0.0) || !(dt > 0.0) || !(frame_hz > 0.0))
    throw std::invalid_argument("GenConfig: speed, dt and frame_hz must be > 0");
  if (force_len < 2) throw std::invalid_argument("GenConfig: force_len must be >= 2");
  if (!(max_displacement > 0.0))
    throw std::invalid_argument("GenConfig: max_displacement must be > 0");
  if (force_noise_frac < 0.0 || image_noise < 0.0)
    throw std::invalid_argument("GenConfig: noise levels must be >= 0");
  if (image_size < 8) throw std::invalid_argument("GenConfig: image_size must be >= 8");
  if (!(pitch_mm > 0.0) || !(area_mm2 > 0.0) || !(rim_mm > 0.0))
    throw std::invalid_argument("GenConfig: optics geometry must be > 0");
  if (lut_bins < 2) throw std::invalid_argument("GenConfig: lut_bins must be >= 2");
  if (!(train_frac > 0.0) || !(val_frac >= 0.0) || !(train_frac + val_frac < 1.0))
    throw std::invalid_argument("GenConfig: split fractions must leave room for a test split");
  // The deepest commanded press must finish inside the force window.
  const double max_depth = *std::max_element(depths_mm.begin(), depths_mm.end());
  if (kind == DatasetKind::Classification &&
      max_depth / speed > dt * static_cast<double>(force_len - 1) + 1e-12)
    throw std::invalid_argument("GenConfig: force window too short for the deepest press");
}

GenConfig gen_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  GenConfig cfg;
  static const std::array<const char*, 26> known{
      "schema_version",  "kind",           "hardness_levels",
      "hardness_min_ha", "hardness_max_ha", "depths_mm",
      "reps",            "regression_samples", "regression_max_imprint_mm",
      "elastomer_stiffness", "hardness_slope", "speed",
      "dt",              "force_len",      "frame_hz",
      "max_displacement", "force_noise_frac", "image_size",
      "pitch_mm",        "area_mm2",       "rim_mm",
      "image_noise",     "lut_bins",       "train_frac",
      "val_frac",        "seed"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end())
      throw std::invalid_argument("config: unknown key \"" + key + "\"");
  }
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion)
    throw std::invalid_argument("config: unsupported schema_version");
  if (j.contains("kind")) cfg.kind = dataset_kind_from_name(j.at("kind").get<std::string>());
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("hardness_levels", cfg.hardness_levels);
  get("hardness_min_ha", cfg.hardness_min_ha);
  get("hardness_max_ha", cfg.hardness_max_ha);
  get("depths_mm", cfg.depths_mm);
  get("reps", cfg.reps);
  get("regression_samples", cfg.regression_samples);
  get("regression_max_imprint_mm", cfg.regression_max_imprint_mm);
  get("elastomer_stiffness", cfg.elastomer_stiffness);
  get("hardness_slope", cfg.hardness_slope);
  get("speed", cfg.speed);
  get("dt", cfg.dt);
  get("force_len", cfg.force_len);
  get("frame_hz", cfg.frame_hz);
  get("max_displacement", cfg.max_displacement);
  get("force_noise_frac", cfg.force_noise_frac);
  get("image_size", cfg.image_size);
  get("pitch_mm", cfg.pitch_mm);
  get("area_mm2", cfg.area_mm2);
  get("rim_mm", cfg.rim_mm);
  get("image_noise", cfg.image_noise);
  get("lut_bins", cfg.lut_bins);
  get("train_frac", cfg.train_frac);
  get("val_frac", cfg.val_frac);
  cfg.validate();
  return cfg;
}

std::string gen_config_to_json(const GenConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = dataset_kind_name(c.kind);
  j["hardness_levels"] = c.hardness_levels;
  j["hardness_min_ha"] = c.hardness_min_ha;
  j["hardness_max_ha"] = c.hardness_max_ha;
  j["depths_mm"] = c.depths_mm;
  j["reps"] = c.reps;
  j["regression_samples"] = c.regression_samples;
  j["regression_max_imprint_mm"] = c.regression_max_imprint_mm;
  j["elastomer_stiffness"] = c.elastomer_stiffness;
  j["hardness_slope"] = c.hardness_slope;
  j["speed"] = c.speed;
  j["dt"] = c.dt;
  j["force_len"] = c.force_len;
  j["frame_hz"] = c.frame_hz;
  j["max_displacement"] = c.max_displacement;
  j["force_noise_frac"] = c.force_noise_frac;
  j["image_size"] = c.image_size;
  j["pitch_mm"] = c.pitch_mm;
  j["area_mm2"] = c.area_mm2;
  j["rim_mm"] = c.rim_mm;
  j["image_noise"] = c.image_noise;
  j["lut_bins"] = c.lut_bins;
  j["train_frac"] = c.train_frac;
  j["val_frac"] = c.val_frac;
  return j.dump(2) + "\n";
}

optics::CalibrationLut build_calibration_lut(int image_size, double pitch_mm, int lut_bins) {
  const optics::LightingRig rig;
  std::vector<ImageRGB> frames;
  std::vector<optics::GradientField> grads;
  for (double radius : kCalibrationRadii)
    for (double depth : kCalibrationDepths) {
      const HeightField hf =
          optics::height_field_sphere(radius, depth, image_size, image_size, pitch_mm);
      optics::GradientField g = optics::gradients_from_height(hf);
      frames.push_back(optics::render_frame(g, rig));
      grads.push_back(std::move(g));
    }
  return optics::calibrate_lut(frames, grads, rig, lut_bins);
}

std::vector<Scenario> scenario_grid(const GenConfig& cfg, std::uint64_t master_seed) {
  cfg.validate();
  std::vector<Scenario> grid;
  const int levels = cfg.hardness_levels;
  const int depths = static_cast<int>(cfg.depths_mm.size());
  grid.reserve(static_cast<std::size_t>(4 * levels * depths * cfg.reps));
  int index = 0;
  for (int s = 0; s < 4; ++s)
    for (int h = 0; h < levels; ++h)
      for (int d = 0; d < depths; ++d)
        for (int r = 0; r < cfg.reps; ++r) {
          Scenario sc;
          sc.index = index;
          sc.shape = kShapes[static_cast<std::size_t>(s)];
          sc.shape_id = s;
          sc.hardness_id = h;
          sc.hardness_ha =
              levels == 1 ? cfg.hardness_min_ha
                          : cfg.hardness_min_ha + (cfg.hardness_max_ha - cfg.hardness_min_ha) *
                                                      h / (levels - 1);
          sc.object_stiffness = contact::stiffness_from_hardness(sc.hardness_ha,
                                                                 cfg.hardness_slope);
          sc.depth_id = d;
          sc.depth_mm = cfg.depths_mm[static_cast<std::size_t>(d)];
          sc.rep = r;
          sc.seed = derive_seed(master_seed, static_cast<std::uint64_t>(index) + 1);
          grid.push_back(sc);
          ++index;
        }
  return grid;
}

PressSim simulate_press(const GenConfig& cfg, optics::ShapeKind shape, double object_stiffness,
                        double depth_mm, std::uint64_t seed) {
  if (!(depth_mm > 0.0) || depth_mm > cfg.max_displacement)
    throw std::domain_error("simulate_press: commanded depth outside the linear regime");
  contact::SpringModel model{object_stiffness, cfg.elastomer_stiffness};
  contact::PressTrajectory traj;
  traj.speed = cfg.speed;
  traj.dt = cfg.dt;
  traj.steps = cfg.force_len;
  traj.max_displacement = cfg.max_displacement;
  traj.press_depth = depth_mm;

  PressSim sim;
  sim.t_press_s = depth_mm / cfg.speed;
  sim.ramp_samples = static_cast<int>(std::llround(sim.t_press_s / cfg.dt)) + 1;
  sim.ramp_samples = std::min(sim.ramp_samples, cfg.force_len);
  sim.force = contact::synth_force_sequence(model, traj, cfg.force_noise_frac,
                                            derive_seed(seed, 1));

  const double share =
      object_stiffness / (object_stiffness + cfg.elastomer_stiffness);
  sim.imprint_mm = depth_mm * share;

  Rng img_rng(derive_seed(seed, 2));
  const optics::LightingRig rig;
  const int n_frames = static_cast<int>(std::llround(sim.t_press_s * cfg.frame_hz)) + 1;
  sim.frames.reserve(static_cast<std::size_t>(std::max(n_frames, 2)));
  for (int f = 0; f < std::max(n_frames, 2); ++f) {
    const double t = std::min(static_cast<double>(f) / cfg.frame_hz, sim.t_press_s);
    const double x2 = cfg.speed * t * share;
    const HeightField hf = optics::height_field_prism(shape, cfg.area_mm2, x2, cfg.rim_mm,
                                                      cfg.image_size, cfg.image_size,
                                                      cfg.pitch_mm);
    sim.frames.push_back(
        add_noise_and_quantize(optics::render_frame(optics::gradients_from_height(hf), rig),
                               cfg.image_noise, img_rng));
  }
  sim.truth_depth = optics::height_field_prism(shape, cfg.area_mm2, sim.imprint_mm, cfg.rim_mm,
                                               cfg.image_size, cfg.image_size, cfg.pitch_mm);
  return sim;
}

std::pair<int, int> select_frame_pair(int n_frames) {
  if (n_frames < 2) throw std::domain_error("select_frame_pair: need at least two frames");
  return {0, n_frames - 1};
}

std::vector<double> resample_linear(std::span<const double> values, int out_len) {
  if (values.size() < 2) throw std::invalid_argument("resample_linear: need >= 2 input values");
  if (out_len < 2) throw std::invalid_argument("resample_linear: need >= 2 output values");
  std::vector<double> out(static_cast<std::size_t>(out_len));
  const double step =
      static_cast<double>(values.size() - 1) / static_cast<double>(out_len - 1);
  for (int i = 0; i < out_len; ++i) {
    const double pos = step * i;
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), values.size() - 2);
    const double frac = pos - static_cast<double>(lo);
    out[static_cast<std::size_t>(i)] = values[lo] * (1.0 - frac) + values[lo + 1] * frac;
  }
  out.back() = values.back();  // exact endpoint regardless of rounding
  out.front() = values.front();
  return out;
}

int Manifest::num_classes(Task task) const {
  switch (task) {
    case Task::Shape: return static_cast<int>(shape_names.size());
    case Task::Hardness: return static_cast<int>(hardness_levels_ha.size());
    case Task::Joint:
      return static_cast<int>(shape_names.size() * hardness_levels_ha.size());
  }
  throw std::invalid_argument("Manifest: unknown task");
}

int Manifest::label(const SampleMeta& s, Task task) const {
  switch (task) {
    case Task::Shape: return s.shape_id;
    case Task::Hardness: return s.hardness_id;
    case Task::Joint: return s.joint_id;
  }
  throw std::invalid_argument("Manifest: unknown task");
}

namespace {

Manifest manifest_skeleton(const GenConfig& cfg, std::uint64_t seed) {
  Manifest m;
  m.kind = cfg.kind;
  m.seed = seed;
  m.image_size = cfg.image_size;
  m.pitch_mm = cfg.pitch_mm;
  m.force_len = cfg.force_len;
  m.dt = cfg.dt;
  m.area_mm2 = cfg.area_mm2;
  for (auto shape : kShapes) m.shape_names.emplace_back(optics::shape_name(shape));
  for (int h = 0; h < cfg.hardness_levels; ++h)
    m.hardness_levels_ha.push_back(
        cfg.hardness_levels == 1
            ? cfg.hardness_min_ha
            : cfg.hardness_min_ha +
                  (cfg.hardness_max_ha - cfg.hardness_min_ha) * h / (cfg.hardness_levels - 1));
  m.depths_mm = cfg.depths_mm;
  return m;
}

void assign_splits_stratified(std::vector<SampleMeta>& samples, int num_classes,
                              const GenConfig& cfg, std::uint64_t master_seed) {
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
  for (int i = 0; i < static_cast<int>(samples.size()); ++i)
    by_class[static_cast<std::size_t>(samples[static_cast<std::size_t>(i)].joint_id)]
        .push_back(i);
  Rng rng(derive_seed(master_seed, 0));
  for (auto& members : by_class) {
    rng.shuffle(members);
    const auto counts =
        split_counts(static_cast<int>(members.size()), cfg.train_frac, cfg.val_frac);
    for (int rank = 0; rank < static_cast<int>(members.size()); ++rank)
      samples[static_cast<std::size_t>(members[static_cast<std::size_t>(rank)])].split =
          split_of_rank(rank, counts);
  }
}

void assign_splits_plain(std::vector<SampleMeta>& samples, const GenConfig& cfg,
                         std::uint64_t master_seed) {
  std::vector<int> order(samples.size());
  for (int i = 0; i < static_cast<int>(order.size()); ++i)
    order[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(master_seed, 0));
  rng.shuffle(order);
  const auto counts = split_counts(static_cast<int>(order.size()), cfg.train_frac, cfg.val_frac);
  for (int rank = 0; rank < static_cast<int>(order.size()); ++rank)
    samples[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])].split =
        split_of_rank(rank, counts);
}

void write_manifest_file(const fs::path& dir, const Manifest& m) {
  write_text_file(dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
}

Manifest generate_classification(const GenConfig& cfg, const fs::path& out, std::uint64_t seed,
                                 int jobs) {
  const auto grid = scenario_grid(cfg, seed);
  const optics::CalibrationLut lut =
      build_calibration_lut(cfg.image_size, cfg.pitch_mm, cfg.lut_bins);
  optics::save_lut((out / "lut.json").string(), lut);

  Manifest manifest = manifest_skeleton(cfg, seed);
  manifest.samples.resize(grid.size());
  for (const Scenario& sc : grid) {
    SampleMeta& s = manifest.samples[static_cast<std::size_t>(sc.index)];
    char id[16];
    std::snprintf(id, sizeof(id), "s%04d", sc.index);
    s.id = id;
    s.dir = std::string("samples/") + id;
    s.shape_id = sc.shape_id;
    s.hardness_id = sc.hardness_id;
    s.joint_id = sc.shape_id * cfg.hardness_levels + sc.hardness_id;
    s.hardness_ha = sc.hardness_ha;
    s.depth_id = sc.depth_id;
    s.depth_mm = sc.depth_mm;
    s.rep = sc.rep;
    s.seed = sc.seed;
    s.object_stiffness = sc.object_stiffness;
  }
  assign_splits_stratified(manifest.samples, 4 * cfg.hardness_levels, cfg, seed);

  std::vector<char> done(grid.size(), 0);
  auto gen_one = [&](std::size_t i) {
    const Scenario& sc = grid[i];
    SampleMeta& s = manifest.samples[i];
    const fs::path dir = out / s.dir;
    fs::create_directories(dir);

    PressSim sim = simulate_press(cfg, sc.shape, sc.object_stiffness, sc.depth_mm, sc.seed);
    s.n_frames = static_cast<int>(sim.frames.size());
    s.imprint_mm = sim.imprint_mm;
    s.t_press_s = sim.t_press_s;

    for (int f = 0; f < s.n_frames; ++f) {
      char name[24];
      std::snprintf(name, sizeof(name), "frame_%02d.png", f);
      write_png_rgb8((dir / name).string(), sim.frames[static_cast<std::size_t>(f)]);
    }
    write_force_csv((dir / "force.csv").string(), sim.force);

    const auto [first, last] = select_frame_pair(s.n_frames);
    const optics::GradientField grad = optics::gradients_from_frame(
        sim.frames[static_cast<std::size_t>(last)], sim.frames[static_cast<std::size_t>(first)],
        lut, cfg.pitch_mm);
    const HeightField depth = optics::rezero_to_border(optics::poisson_reconstruct(grad));
    write_raw((dir / "depth.raw").string(), depth);
    HeightField gx = HeightField::zeros(grad.height, grad.width, grad.pitch);
    gx.data = grad.gx;
    HeightField gy = HeightField::zeros(grad.height, grad.width, grad.pitch);
    gy.data = grad.gy;
    write_raw((dir / "gx.raw").string(), gx);
    write_raw((dir / "gy.raw").string(), gy);

    // Hand-crafted features: contact radius from the reconstruction, object
    // stiffness from the ramp portion of the force window.
    const auto region = optics::fit_contact_region(depth, 0.02);
    s.baseline_radius_mm =
        region ? std::sqrt(region->area_mm2 / std::numbers::pi) : 0.0;
    contact::ForceSequence ramp;
    ramp.dt = sim.force.dt;
    ramp.force.assign(sim.force.force.begin(),
                      sim.force.force.begin() + sim.ramp_samples);
    s.baseline_stiffness =
        contact::infer_stiffness(ramp, cfg.speed, cfg.elastomer_stiffness);

    json gt = meta_to_json(s, DatasetKind::Classification);
    gt["schema_version"] = kSchemaVersion;
    write_text_file(dir / "gt.json", gt.dump(2) + "\n");
    done[i] = 1;
  };

  try {
    parallel_for(grid.size(), jobs, gen_one);
  } catch (...) {
    // Keep whatever completed as a valid truncated manifest, then rethrow.
    Manifest partial = manifest_skeleton(cfg, seed);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (done[i]) partial.samples.push_back(manifest.samples[i]);
    write_manifest_file(out, partial);
    throw;
  }

  // Normalization statistics over the train split only.
  Normalization norm;
  double sum_d = 0, sum_d2 = 0, sum_x = 0, sum_x2 = 0, sum_y = 0, sum_y2 = 0;
  std::size_t count = 0;
  for (const SampleMeta& s : manifest.samples) {
    if (s.split != "train") continue;
    const HeightField depth = read_raw((out / s.dir / "depth.raw").string());
    const HeightField gx = read_raw((out / s.dir / "gx.raw").string());
    const HeightField gy = read_raw((out / s.dir / "gy.raw").string());
    for (double v : depth.data) { sum_d += v; sum_d2 += v * v; }
    for (double v : gx.data) { sum_x += v; sum_x2 += v * v; }
    for (double v : gy.data) { sum_y += v; sum_y2 += v * v; }
    count += depth.data.size();
  }
  if (count > 0) {
    const double n = static_cast<double>(count);
    norm.depth_mean = sum_d / n;
    norm.depth_std = std::max(std::sqrt(std::max(sum_d2 / n - norm.depth_mean * norm.depth_mean,
                                                 0.0)), 1e-12);
    norm.gx_mean = sum_x / n;
    norm.gx_std = std::max(std::sqrt(std::max(sum_x2 / n - norm.gx_mean * norm.gx_mean, 0.0)),
                           1e-12);
    norm.gy_mean = sum_y / n;
    norm.gy_std = std::max(std::sqrt(std::max(sum_y2 / n - norm.gy_mean * norm.gy_mean, 0.0)),
                           1e-12);
  }
  manifest.normalization = norm;
  write_manifest_file(out, manifest);
  return manifest;
}

Manifest generate_force_regression(const GenConfig& cfg, const fs::path& out,
                                   std::uint64_t seed, int jobs) {
  Manifest manifest = manifest_skeleton(cfg, seed);
  manifest.samples.resize(static_cast<std::size_t>(cfg.regression_samples));

  // Rigid probe: the object spring dwarfs the elastomer, so the commanded
  // displacement goes entirely into the imprint and F = k2 * imprint.
  for (int i = 0; i < cfg.regression_samples; ++i) {
    SampleMeta& s = manifest.samples[static_cast<std::size_t>(i)];
    char id[16];
    std::snprintf(id, sizeof(id), "s%04d", i);
    s.id = id;
    s.dir = std::string("samples/") + id;
    s.shape_id = i % 4;
    s.seed = derive_seed(seed, static_cast<std::uint64_t>(i) + 1);
    Rng rng(s.seed);
    s.imprint_mm = (i % 10 == 9) ? 0.0 : rng.uniform() * cfg.regression_max_imprint_mm;
    s.target_force_n = cfg.elastomer_stiffness * s.imprint_mm;
    s.n_frames = 2;
  }
  assign_splits_plain(manifest.samples, cfg, seed);

  std::vector<char> done(manifest.samples.size(), 0);
  const optics::LightingRig rig;
  auto gen_one = [&](std::size_t i) {
    SampleMeta& s = manifest.samples[i];
    const fs::path dir = out / s.dir;
    fs::create_directories(dir);
    Rng img_rng(derive_seed(s.seed, 2));
    const auto shape = kShapes[static_cast<std::size_t>(s.shape_id)];
    const HeightField flat = optics::height_field_prism(shape, cfg.area_mm2, 0.0, cfg.rim_mm,
                                                        cfg.image_size, cfg.image_size,
                                                        cfg.pitch_mm);
    const HeightField pressed = optics::height_field_prism(shape, cfg.area_mm2, s.imprint_mm,
                                                           cfg.rim_mm, cfg.image_size,
                                                           cfg.image_size, cfg.pitch_mm);
    const ImageRGB ref = add_noise_and_quantize(
        optics::render_frame(optics::gradients_from_height(flat), rig), cfg.image_noise,
        img_rng);
    const ImageRGB press = add_noise_and_quantize(
        optics::render_frame(optics::gradients_from_height(pressed), rig), cfg.image_noise,
        img_rng);
    write_png_rgb8((dir / "ref.png").string(), ref);
    write_png_rgb8((dir / "press.png").string(), press);
    json gt = meta_to_json(s, DatasetKind::ForceRegression);
    gt["schema_version"] = kSchemaVersion;
    write_text_file(dir / "gt.json", gt.dump(2) + "\n");
    done[i] = 1;
  };

  try {
    parallel_for(manifest.samples.size(), jobs, gen_one);
  } catch (...) {
    Manifest partial = manifest_skeleton(cfg, seed);
    for (std::size_t i = 0; i < manifest.samples.size(); ++i)
      if (done[i]) partial.samples.push_back(manifest.samples[i]);
    write_manifest_file(out, partial);
    throw;
  }
  write_manifest_file(out, manifest);
  return manifest;
}

}  // namespace

Manifest generate_dataset(const GenConfig& cfg, const std::string& out_dir, std::uint64_t seed,
                          int jobs) {
  cfg.validate();
  const fs::path out(out_dir);
  ensure_fresh_dir(out.string());
  fs::create_directories(out / "samples");
  json resolved = json::parse(gen_config_to_json(cfg));
  resolved["seed"] = seed;
  write_text_file(out / "config.resolved.json", resolved.dump(2) + "\n");
  if (cfg.kind == DatasetKind::Classification)
    return generate_classification(cfg, out, seed, jobs);
  return generate_force_regression(cfg, out, seed, jobs);
}

Manifest load_manifest(const std::string& dir) {
  return manifest_from_json(json::parse(read_text_file(fs::path(dir) / "manifest.json")));
}

std::vector<int> Dataset::split_indices(const std::string& split) const {
  std::vector<int> idx;
  for (int i = 0; i < size(); ++i)
    if (manifest_.samples[static_cast<std::size_t>(i)].split == split) idx.push_back(i);
  return idx;
}

Dataset Dataset::load(const std::string& dir) {
  Dataset ds;
  ds.manifest_ = load_manifest(dir);
  const Manifest& m = ds.manifest_;
  const int s = m.image_size;
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  ds.sample_stride_ = 3 * plane;
  ds.force_stride_ = static_cast<std::size_t>(m.force_len);
  const std::size_t n = m.samples.size();
  ds.image_data_.resize(n * ds.sample_stride_);
  const fs::path root(dir);

  if (m.kind == DatasetKind::Classification) {
    if (!m.normalization)
      throw std::runtime_error("Dataset: manifest has no normalization statistics");
    const Normalization& norm = *m.normalization;
    ds.force_data_.resize(n * ds.force_stride_);
    for (std::size_t i = 0; i < n; ++i) {
      const SampleMeta& meta = m.samples[i];
      const HeightField depth = read_raw((root / meta.dir / "depth.raw").string());
      const HeightField gx = read_raw((root / meta.dir / "gx.raw").string());
      const HeightField gy = read_raw((root / meta.dir / "gy.raw").string());
      if (depth.height != s || depth.width != s)
        throw std::runtime_error("Dataset: depth raster mismatch for " + meta.id);
      double* img = ds.image_data_.data() + i * ds.sample_stride_;
      for (std::size_t p = 0; p < plane; ++p) {
        img[p] = (depth.data[p] - norm.depth_mean) / norm.depth_std;
        img[plane + p] = (gx.data[p] - norm.gx_mean) / norm.gx_std;
        img[2 * plane + p] = (gy.data[p] - norm.gy_mean) / norm.gy_std;
      }
      const contact::ForceSequence seq = read_force_csv((root / meta.dir / "force.csv").string());
      if (seq.size() != m.force_len)
        throw std::runtime_error("Dataset: force window length mismatch for " + meta.id);
      double* frc = ds.force_data_.data() + i * ds.force_stride_;
      for (int t = 0; t < m.force_len; ++t)
        frc[t] = seq.force[static_cast<std::size_t>(t)] / m.force_full_scale_n;
    }
  } else {
    ds.targets_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const SampleMeta& meta = m.samples[i];
      const ImageRGB ref = read_png_rgb8((root / meta.dir / "ref.png").string());
      const ImageRGB press = read_png_rgb8((root / meta.dir / "press.png").string());
      if (ref.height != s || press.height != s)
        throw std::runtime_error("Dataset: frame raster mismatch for " + meta.id);
      double* img = ds.image_data_.data() + i * ds.sample_stride_;
      // Planar difference image: channels stay separate for the encoder.
      for (int ch = 0; ch < 3; ++ch)
        for (std::size_t p = 0; p < plane; ++p)
          img[static_cast<std::size_t>(ch) * plane + p] =
              press.data[3 * p + static_cast<std::size_t>(ch)] -
              ref.data[3 * p + static_cast<std::size_t>(ch)];
      ds.targets_[i] = meta.target_force_n;
    }
  }
  return ds;
}

nn::Tensor Dataset::depth_batch(std::span<const int> idx) const {
  if (manifest_.kind != DatasetKind::Classification)
    throw std::logic_error("Dataset: depth_batch needs a classification dataset");
  const int s = manifest_.image_size;
  nn::Tensor t({static_cast<int>(idx.size()), 3, s, s});
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(image_data_.data() + static_cast<std::size_t>(idx[k]) * sample_stride_,
                sample_stride_, t.data.data() + k * sample_stride_);
  return t;
}

nn::Tensor Dataset::force_batch(std::span<const int> idx) const {
  if (manifest_.kind != DatasetKind::Classification)
    throw std::logic_error("Dataset: force_batch needs a classification dataset");
  nn::Tensor t({static_cast<int>(idx.size()), 1, manifest_.force_len});
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(force_data_.data() + static_cast<std::size_t>(idx[k]) * force_stride_,
                force_stride_, t.data.data() + k * force_stride_);
  return t;
}

nn::Tensor Dataset::diff_batch(std::span<const int> idx) const {
  if (manifest_.kind != DatasetKind::ForceRegression)
    throw std::logic_error("Dataset: diff_batch needs a force-regression dataset");
  const int s = manifest_.image_size;
  nn::Tensor t({static_cast<int>(idx.size()), 3, s, s});
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(image_data_.data() + static_cast<std::size_t>(idx[k]) * sample_stride_,
                sample_stride_, t.data.data() + k * sample_stride_);
  return t;
}

std::vector<double> Dataset::targets(std::span<const int> idx) const {
  if (manifest_.kind != DatasetKind::ForceRegression)
    throw std::logic_error("Dataset: targets need a force-regression dataset");
  std::vector<double> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k)
    out[k] = targets_[static_cast<std::size_t>(idx[k])];
  return out;
}

std::vector<int> Dataset::labels(std::span<const int> idx, Task task) const {
  std::vector<int> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k)
    out[k] = manifest_.label(manifest_.samples[static_cast<std::size_t>(idx[k])], task);
  return out;
}

}  // namespace taxel::dataset
