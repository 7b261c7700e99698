// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// taxel: command-line front end for the visuotactile pipeline. Subcommands
// cover dataset generation, optical calibration, depth reconstruction,
// single-press dumps, training, evaluation, modality ablation, the manual
// feature baseline, and metric collation for plotting. Every run writes its
// resolved configuration next to its outputs, and output directories are
// write-once: an existing non-empty --out is refused, inputs are never
// mutated. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "taxel/checkpoint.hpp"
#include "taxel/common.hpp"
#include "taxel/contact.hpp"
#include "taxel/dataset.hpp"
#include "taxel/image.hpp"
#include "taxel/optics.hpp"
#include "taxel/trainer.hpp"
#include "taxel/twostream.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace taxel;

/// Input problem detected after flag parsing; reported as a usage error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

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

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

/// Stamps the resolved run configuration next to the outputs.
void write_resolved(const fs::path& out_dir, json j) {
  j["schema_version"] = 1;
  write_json_file(out_dir / "config.resolved.json", j);
}

dataset::GenConfig load_gen_config(const std::string& path) {
  if (path.empty()) return dataset::GenConfig{};
  return dataset::gen_config_from_json(read_text_file(path));
}

json classifier_model_json(const twostream::ModelConfig& mc, dataset::Task task) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "classifier";
  j["task"] = dataset::task_name(task);
  j["mode"] = twostream::stream_mode_name(mc.mode);
  j["image_size"] = mc.image_size;
  j["force_len"] = mc.force_len;
  j["num_classes"] = mc.num_classes;
  return j;
}

json regressor_model_json(int image_size) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "regressor";
  j["image_size"] = image_size;
  return j;
}

json summary_json(const trainer::TrainResult& result, const json& model_meta,
                  const std::string& metric) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = model_meta.at("kind");
  if (model_meta.contains("task")) j["task"] = model_meta.at("task");
  if (model_meta.contains("mode")) j["mode"] = model_meta.at("mode");
  j["metric"] = metric;
  j["best_epoch"] = result.best_epoch;
  j["best_val_metric"] = result.best_val_metric;
  j["epochs_run"] = static_cast<int>(result.history.size());
  j["aborted_nan"] = result.aborted_nan;
  return j;
}

/// Writes the full training artifact set for one trained model.
void write_train_artifacts(const fs::path& dir, const json& model_meta,
                           const nn::ParamStore& store, const trainer::TrainResult& result,
                           const std::string& metric) {
  const std::string model_text = model_meta.dump(2) + "\n";
  write_text_file(dir / "model.json", model_text);
  nn::save_checkpoint((dir / "checkpoint.bin").string(), store, model_text);
  write_text_file(dir / "history.csv", trainer::history_csv(result.history));
  write_json_file(dir / "summary.json", summary_json(result, model_meta, metric));
}

void write_eval_report(const fs::path& dir, const trainer::EvalReport& report,
                       const std::string& stem) {
  write_text_file(dir / (stem + ".json"), trainer::eval_report_to_json(report));
  write_text_file(dir / ("confusion" + stem.substr(6) + ".csv"), trainer::confusion_csv(report));
}

/// Trains one classifier configuration and writes its artifacts into `dir`.
trainer::TrainResult run_classifier_training(twostream::Model& model,
                                             const dataset::Dataset& data, dataset::Task task,
                                             const trainer::TrainConfig& cfg, std::uint64_t seed,
                                             const fs::path& dir) {
  const trainer::TrainResult result = trainer::train_classifier(model, data, task, cfg, seed);
  write_train_artifacts(dir, classifier_model_json(model.config(), task), model.store(), result,
                        "accuracy");
  if (result.aborted_nan) log_warn("training aborted on a non-finite loss; best params kept");
  return result;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

// ---------------------------------------------------------------- gen-data

struct GenOpts {
  std::string config;
  std::string out;
  std::uint64_t seed = 42;
  int jobs = 1;
};

void cmd_gen_data(const GenOpts& o) {
  const dataset::GenConfig cfg = load_gen_config(o.config);
  const dataset::Manifest manifest = dataset::generate_dataset(cfg, o.out, o.seed, o.jobs);
  log_info("generated " + std::to_string(manifest.samples.size()) + " samples into " + o.out);
}

// --------------------------------------------------------------- calibrate

struct CalibrateOpts {
  std::string out;
  int image_size = 64;
  double pitch_mm = 0.1;
  int lut_bins = 16;
};

void cmd_calibrate(const CalibrateOpts& o) {
  ensure_fresh_dir(o.out);
  const fs::path out(o.out);
  write_resolved(out, json{{"command", "calibrate"},
                           {"image_size", o.image_size},
                           {"pitch_mm", o.pitch_mm},
                           {"lut_bins", o.lut_bins}});
  const optics::CalibrationLut lut =
      dataset::build_calibration_lut(o.image_size, o.pitch_mm, o.lut_bins);
  optics::save_lut((out / "lut.json").string(), lut);
  const auto populated = static_cast<std::size_t>(
      std::count_if(lut.counts.begin(), lut.counts.end(), [](std::uint32_t c) { return c > 0; }));
  log_info("calibrated lut: " + std::to_string(populated) + "/" +
           std::to_string(lut.cell_count()) + " cells populated");
}

// ------------------------------------------------------------- reconstruct

struct ReconstructOpts {
  std::string frame, ref, lut, out;
  double pitch_mm = 0.1;
  double mask_norm = optics::kContactMaskNorm;
  double area_threshold_mm = 0.02;
};

void cmd_reconstruct(const ReconstructOpts& o) {
  ensure_fresh_dir(o.out);
  const fs::path out(o.out);
  write_resolved(out, json{{"command", "reconstruct"},
                           {"frame", o.frame},
                           {"ref", o.ref},
                           {"lut", o.lut},
                           {"pitch_mm", o.pitch_mm},
                           {"mask_norm", o.mask_norm},
                           {"area_threshold_mm", o.area_threshold_mm}});
  const ImageRGB frame = read_png_rgb8(o.frame);
  const ImageRGB ref = read_png_rgb8(o.ref);
  const optics::CalibrationLut lut = optics::load_lut(o.lut);
  const optics::GradientField g =
      optics::gradients_from_frame(frame, ref, lut, o.pitch_mm, o.mask_norm);
  const HeightField depth = optics::rezero_to_border(optics::poisson_reconstruct(g));
  write_raw((out / "depth.raw").string(), depth);
  write_raw((out / "gx.raw").string(), HeightField{g.height, g.width, g.pitch, g.gx});
  write_raw((out / "gy.raw").string(), HeightField{g.height, g.width, g.pitch, g.gy});
  json region{{"contact", false}, {"threshold_mm", o.area_threshold_mm}};
  if (const auto fit = optics::fit_contact_region(depth, o.area_threshold_mm)) {
    region["contact"] = true;
    region["pixel_count"] = fit->pixel_count;
    region["area_mm2"] = fit->area_mm2;
    region["max_depth_mm"] = fit->max_depth;
  }
  write_json_file(out / "region.json", region);
  log_info("reconstructed " + std::to_string(depth.height) + "x" + std::to_string(depth.width) +
           " depth map into " + o.out);
}

// ------------------------------------------------------------------- press

struct PressOpts {
  std::string config;
  std::string out;
  std::string shape = "circle";
  double hardness_ha = 40.0;
  double depth_mm = 0.6;
  std::uint64_t seed = 42;
};

void cmd_press(const PressOpts& o) {
  const dataset::GenConfig cfg = load_gen_config(o.config);
  const double k1 = contact::stiffness_from_hardness(o.hardness_ha, cfg.hardness_slope);
  const dataset::PressSim sim =
      dataset::simulate_press(cfg, optics::shape_from_name(o.shape), k1, o.depth_mm, o.seed);
  ensure_fresh_dir(o.out);
  const fs::path out(o.out);
  write_resolved(out, json{{"command", "press"},
                           {"shape", o.shape},
                           {"hardness_ha", o.hardness_ha},
                           {"depth_mm", o.depth_mm},
                           {"seed", o.seed},
                           {"generator", json::parse(dataset::gen_config_to_json(cfg))}});
  for (std::size_t f = 0; f < sim.frames.size(); ++f) {
    char name[24];
    std::snprintf(name, sizeof(name), "frame_%02d.png", static_cast<int>(f));
    write_png_rgb8((out / name).string(), sim.frames[f]);
  }
  dataset::write_force_csv((out / "force.csv").string(), sim.force);
  write_raw((out / "truth_depth.raw").string(), sim.truth_depth);
  write_json_file(out / "press.json",
                  json{{"shape", o.shape},
                       {"hardness_ha", o.hardness_ha},
                       {"depth_mm", o.depth_mm},
                       {"object_stiffness", k1},
                       {"imprint_mm", sim.imprint_mm},
                       {"t_press_s", sim.t_press_s},
                       {"ramp_samples", sim.ramp_samples},
                       {"n_frames", static_cast<int>(sim.frames.size())}});
  log_info("pressed " + o.shape + " to " + format_double(o.depth_mm) + " mm, imprint " +
           format_double(sim.imprint_mm) + " mm, " + std::to_string(sim.frames.size()) +
           " frames");
}

// ------------------------------------------------------------------- train

struct TrainOpts {
  std::string data;
  std::string out;
  std::string task;
  std::string mode;
  trainer::TrainConfig cfg{10, 16, 2e-3, 32};
  std::uint64_t seed = 42;
  bool task_given = false;
  bool mode_given = false;
};

json train_config_json(const trainer::TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"eval_batch_size", cfg.eval_batch_size}};
}

void cmd_train(const TrainOpts& o) {
  ensure_fresh_dir(o.out);
  const fs::path out(o.out);
  const dataset::Dataset data = dataset::Dataset::load(o.data);
  const dataset::Manifest& m = data.manifest();

  if (m.kind == dataset::DatasetKind::ForceRegression) {
    if (o.task_given || o.mode_given)
      throw UsageError("--task and --mode apply to classification datasets only");
    json resolved = train_config_json(o.cfg);
    resolved["command"] = "train";
    resolved["data"] = o.data;
    resolved["kind"] = "regressor";
    resolved["seed"] = o.seed;
    write_resolved(out, resolved);
    twostream::ForceRegressor model(m.image_size);
    const trainer::TrainResult result = trainer::train_regressor(model, data, o.cfg, o.seed);
    write_train_artifacts(out, regressor_model_json(m.image_size), model.store(), result,
                          "mae_n");
    if (result.aborted_nan) log_warn("training aborted on a non-finite loss; best params kept");
    log_info("trained regressor: best val MAE " + format_double(result.best_val_metric) +
             " N at epoch " + std::to_string(result.best_epoch));
    return;
  }

  const dataset::Task task = dataset::task_from_name(o.task.empty() ? "joint" : o.task);
  const twostream::StreamMode mode =
      twostream::stream_mode_from_name(o.mode.empty() ? "fused" : o.mode);
  json resolved = train_config_json(o.cfg);
  resolved["command"] = "train";
  resolved["data"] = o.data;
  resolved["kind"] = "classifier";
  resolved["task"] = dataset::task_name(task);
  resolved["mode"] = twostream::stream_mode_name(mode);
  resolved["seed"] = o.seed;
  write_resolved(out, resolved);
  twostream::ModelConfig mc;
  mc.mode = mode;
  mc.image_size = m.image_size;
  mc.force_len = m.force_len;
  mc.num_classes = m.num_classes(task);
  twostream::Model model(mc);
  const trainer::TrainResult result = run_classifier_training(model, data, task, o.cfg, o.seed, out);
  log_info("trained classifier: best val accuracy " + format_double(result.best_val_metric) +
           " at epoch " + std::to_string(result.best_epoch));
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
  std::string model;
  std::string data;
  std::string out;
  std::string split = "test";
  int eval_batch_size = 32;
};

void cmd_eval(const EvalOpts& o) {
  ensure_fresh_dir(o.out);
  const fs::path out(o.out);
  write_resolved(out, json{{"command", "eval"},
                           {"model", o.model},
                           {"data", o.data},
                           {"split", o.split},
                           {"eval_batch_size", o.eval_batch_size}});
  const fs::path model_dir(o.model);
  const json meta = read_json_file(model_dir / "model.json");
  const std::string checkpoint = (model_dir / "checkpoint.bin").string();
  const dataset::Dataset data = dataset::Dataset::load(o.data);
  const dataset::Manifest& m = data.manifest();
  const std::string kind = meta.at("kind").get<std::string>();

  if (kind == "classifier") {
    if (m.kind != dataset::DatasetKind::Classification)
      throw std::runtime_error("classifier model evaluated against a non-classification dataset");
    const dataset::Task task = dataset::task_from_name(meta.at("task").get<std::string>());
    twostream::ModelConfig mc;
    mc.mode = twostream::stream_mode_from_name(meta.at("mode").get<std::string>());
    mc.image_size = meta.at("image_size").get<int>();
    mc.force_len = meta.at("force_len").get<int>();
    mc.num_classes = meta.at("num_classes").get<int>();
    if (mc.image_size != m.image_size || mc.force_len != m.force_len ||
        mc.num_classes != m.num_classes(task))
      throw std::runtime_error("model " + o.model + " does not match dataset " + o.data +
                               " (image size, force length, or class count differ)");
    twostream::Model model(mc);
    nn::load_checkpoint(checkpoint, model.store());
    const trainer::EvalReport report =
        trainer::evaluate_classifier(model, data, task, o.split, o.eval_batch_size);
    write_eval_report(out, report, "report");
    log_info("eval " + o.split + " accuracy " + format_double(report.accuracy) + " over " +
             std::to_string(report.total) + " samples");
    return;
  }
  if (kind != "regressor") throw std::runtime_error("unknown model kind: " + kind);
  if (m.kind != dataset::DatasetKind::ForceRegression)
    throw std::runtime_error("regressor model evaluated against a non-regression dataset");
  const int image_size = meta.at("image_size").get<int>();
  if (image_size != m.image_size)
    throw std::runtime_error("model " + o.model + " does not match dataset " + o.data +
                             " (image size differs)");
  twostream::ForceRegressor model(image_size);
  nn::load_checkpoint(checkpoint, model.store());
  const std::vector<int> idx = data.split_indices(o.split);
  if (idx.empty()) throw std::runtime_error("split " + o.split + " is empty");
  std::string rows = "id,target_n,predicted_n\n";
  double abs_sum = 0.0, abs_max = 0.0;
  for (std::size_t start = 0; start < idx.size();
       start += static_cast<std::size_t>(o.eval_batch_size)) {
    const std::size_t stop =
        std::min(idx.size(), start + static_cast<std::size_t>(o.eval_batch_size));
    const std::span<const int> batch(idx.data() + start, stop - start);
    const nn::Tensor pred = model.predict(data.diff_batch(batch));
    const std::vector<double> target = data.targets(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double predicted = pred[i] * m.force_full_scale_n;
      const double err = std::abs(predicted - target[i]);
      abs_sum += err;
      abs_max = std::max(abs_max, err);
      rows += csv_field(m.samples[static_cast<std::size_t>(batch[i])].id) + ',' +
              format_double(target[i]) + ',' + format_double(predicted) + '\n';
    }
  }
  const double mae = abs_sum / static_cast<double>(idx.size());
  write_text_file(out / "predictions.csv", rows);
  write_json_file(out / "metrics.json", json{{"schema_version", 1},
                                             {"kind", "regressor"},
                                             {"split", o.split},
                                             {"count", static_cast<int>(idx.size())},
                                             {"mae_n", mae},
                                             {"max_abs_err_n", abs_max}});
  log_info("eval " + o.split + " MAE " + format_double(mae) + " N over " +
           std::to_string(idx.size()) + " samples");
}

// ------------------------------------------------------------------ ablate

struct AblateOpts {
  std::string data;
  std::string out;
  std::string task = "joint";
  trainer::TrainConfig cfg{10, 16, 2e-3, 32};
  std::uint64_t seed = 42;
};

void cmd_ablate(const AblateOpts& o) {
  ensure_fresh_dir(o.out);
  const fs::path out(o.out);
  const dataset::Dataset data = dataset::Dataset::load(o.data);
  if (data.manifest().kind != dataset::DatasetKind::Classification)
    throw std::runtime_error("ablate requires a classification dataset");
  const dataset::Task task = dataset::task_from_name(o.task);
  json resolved = train_config_json(o.cfg);
  resolved["command"] = "ablate";
  resolved["data"] = o.data;
  resolved["task"] = dataset::task_name(task);
  resolved["seed"] = o.seed;
  write_resolved(out, resolved);

  json modes;
  double fused_acc = 0.0, best_single = 0.0;
  for (const auto mode :
       {twostream::StreamMode::Fused, twostream::StreamMode::ImageOnly,
        twostream::StreamMode::ForceOnly}) {
    const std::string name = twostream::stream_mode_name(mode);
    const fs::path dir = out / name;
    fs::create_directories(dir);
    twostream::ModelConfig mc;
    mc.mode = mode;
    mc.image_size = data.manifest().image_size;
    mc.force_len = data.manifest().force_len;
    mc.num_classes = data.manifest().num_classes(task);
    twostream::Model model(mc);
    const trainer::TrainResult result =
        run_classifier_training(model, data, task, o.cfg, o.seed, dir);
    const trainer::EvalReport report =
        trainer::evaluate_classifier(model, data, task, "test", o.cfg.eval_batch_size);
    write_eval_report(dir, report, "report");
    modes[name] = json{{"test_accuracy", report.accuracy},
                       {"best_val_metric", result.best_val_metric},
                       {"best_epoch", result.best_epoch}};
    if (mode == twostream::StreamMode::Fused)
      fused_acc = report.accuracy;
    else
      best_single = std::max(best_single, report.accuracy);
    log_info("ablate " + name + ": test accuracy " + format_double(report.accuracy));
  }
  write_json_file(out / "ablation.json",
                  json{{"schema_version", 1},
                       {"task", dataset::task_name(task)},
                       {"modes", modes},
                       {"fused_minus_best_single", fused_acc - best_single}});
}

// ---------------------------------------------------------------- baseline

struct BaselineOpts {
  std::string data;
  std::string out;
  std::string task = "hardness";
  trainer::TrainConfig cfg{200, 32, 1e-2, 32};
  std::uint64_t seed = 42;
};

void cmd_baseline(const BaselineOpts& o) {
  ensure_fresh_dir(o.out);
  const fs::path out(o.out);
  const dataset::Dataset data = dataset::Dataset::load(o.data);
  const dataset::Task task = dataset::task_from_name(o.task);
  json resolved = train_config_json(o.cfg);
  resolved["command"] = "baseline";
  resolved["data"] = o.data;
  resolved["task"] = dataset::task_name(task);
  resolved["seed"] = o.seed;
  write_resolved(out, resolved);
  const trainer::BaselineOutcome outcome = trainer::train_manual_baseline(data, task, o.cfg, o.seed);
  write_text_file(out / "history.csv", trainer::history_csv(outcome.result.history));
  write_eval_report(out, outcome.val_report, "report.val");
  write_eval_report(out, outcome.test_report, "report.test");
  json summary;
  summary["schema_version"] = 1;
  summary["kind"] = "baseline";
  summary["task"] = dataset::task_name(task);
  summary["metric"] = "accuracy";
  summary["best_epoch"] = outcome.result.best_epoch;
  summary["best_val_metric"] = outcome.result.best_val_metric;
  summary["epochs_run"] = static_cast<int>(outcome.result.history.size());
  summary["aborted_nan"] = outcome.result.aborted_nan;
  summary["test_accuracy"] = outcome.test_report.accuracy;
  write_json_file(out / "summary.json", summary);
  log_info("baseline " + o.task + ": test accuracy " +
           format_double(outcome.test_report.accuracy));
}

// ------------------------------------------------------------------ report

struct ReportOpts {
  std::vector<std::string> inputs;
  std::string out;
};

/// Metric files are recognized by content so renamed copies still collate.
std::string classify_record(const json& j) {
  if (!j.is_object()) return "";
  if (j.contains("accuracy") && j.contains("confusion") && j.contains("split"))
    return "eval_report";
  if (j.contains("mae_n") && j.contains("split")) return "regression_metrics";
  if (j.contains("modes") && j.contains("fused_minus_best_single")) return "ablation";
  if (j.contains("best_epoch") && j.contains("metric")) return "train_summary";
  return "";
}

bool metric_file_name(const std::string& name) {
  static const std::vector<std::string> names{"report.json",  "report.val.json",
                                              "report.test.json", "metrics.json",
                                              "ablation.json", "summary.json"};
  return std::find(names.begin(), names.end(), name) != names.end();
}

void cmd_report(const ReportOpts& o) {
  struct Record {
    std::string path;
    std::string type;
    json data;
  };
  std::vector<Record> records;
  auto consider = [&records](const fs::path& p) {
    if (!metric_file_name(p.filename().string())) return;
    const json j = read_json_file(p);
    const std::string type = classify_record(j);
    if (type.empty()) {
      log_debug("skipping unrecognized metric file " + p.generic_string());
      return;
    }
    records.push_back({p.generic_string(), type, j});
  };
  for (const std::string& input : o.inputs) {
    const fs::path p(input);
    if (fs::is_regular_file(p)) {
      consider(p);
    } else {
      for (const auto& entry : fs::recursive_directory_iterator(p))
        if (entry.is_regular_file()) consider(entry.path());
    }
  }
  std::sort(records.begin(), records.end(),
            [](const Record& a, const Record& b) { return a.path < b.path; });

  ensure_fresh_dir(o.out);
  const fs::path out(o.out);
  write_resolved(out, json{{"command", "report"}, {"inputs", o.inputs}});
  json sources = json::array();
  std::string csv = "path,type,kind,task,mode,split,metric,value\n";
  auto row = [&csv](const std::string& path, const std::string& type, const std::string& kind,
                    const std::string& task, const std::string& mode, const std::string& split,
                    const std::string& metric, double value) {
    csv += csv_field(path) + ',' + type + ',' + kind + ',' + task + ',' + mode + ',' + split +
           ',' + metric + ',' + format_double(value) + '\n';
  };
  for (const Record& r : records) {
    sources.push_back(json{{"path", r.path}, {"type", r.type}, {"data", r.data}});
    const json& d = r.data;
    if (r.type == "eval_report") {
      row(r.path, r.type, "classifier", d.value("task", ""), d.value("mode", ""),
          d.value("split", ""), "accuracy", d.at("accuracy").get<double>());
    } else if (r.type == "regression_metrics") {
      row(r.path, r.type, "regressor", "", "", d.value("split", ""), "mae_n",
          d.at("mae_n").get<double>());
    } else if (r.type == "train_summary") {
      row(r.path, r.type, d.value("kind", ""), d.value("task", ""), d.value("mode", ""), "val",
          "best_val_" + d.value("metric", "metric"), d.at("best_val_metric").get<double>());
    } else if (r.type == "ablation") {
      for (const auto& [mode, stats] : d.at("modes").items())
        row(r.path, r.type, "classifier", d.value("task", ""), mode, "test", "test_accuracy",
            stats.at("test_accuracy").get<double>());
      row(r.path, r.type, "classifier", d.value("task", ""), "", "test",
          "fused_minus_best_single", d.at("fused_minus_best_single").get<double>());
    }
  }
  write_json_file(out / "report.json",
                  json{{"schema_version", 1}, {"command", "report"}, {"sources", sources}});
  write_text_file(out / "metrics.csv", csv);
  log_info("collated " + std::to_string(records.size()) + " metric files into " + o.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taxel: tactile press simulation, depth reconstruction, and two-stream learning"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic press dataset");
  gen_cmd->add_option("--config", gen.config, "Generator config JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output dataset directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--jobs", gen.jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->callback([&gen] { cmd_gen_data(gen); });

  CalibrateOpts cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Fit the shading-to-gradient lookup table");
  cal_cmd->add_option("--out", cal.out, "Output directory")->required();
  cal_cmd->add_option("--image-size", cal.image_size, "Calibration raster, px")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cal_cmd->add_option("--pitch", cal.pitch_mm, "Pixel pitch, mm")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cal_cmd->add_option("--bins", cal.lut_bins, "Lookup bins per channel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cal_cmd->callback([&cal] { cmd_calibrate(cal); });

  ReconstructOpts rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Invert one frame to a depth map");
  rec_cmd->add_option("--frame", rec.frame, "Pressed frame PNG")->required()->check(CLI::ExistingFile);
  rec_cmd->add_option("--ref", rec.ref, "Non-contact reference PNG")
      ->required()
      ->check(CLI::ExistingFile);
  rec_cmd->add_option("--lut", rec.lut, "Calibration lookup table")
      ->required()
      ->check(CLI::ExistingFile);
  rec_cmd->add_option("--out", rec.out, "Output directory")->required();
  rec_cmd->add_option("--pitch", rec.pitch_mm, "Pixel pitch, mm")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rec_cmd->add_option("--mask-norm", rec.mask_norm, "Contact mask threshold on |delta RGB|")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  rec_cmd->add_option("--area-threshold", rec.area_threshold_mm, "Contact depth threshold, mm")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rec_cmd->callback([&rec] { cmd_reconstruct(rec); });

  PressOpts press;
  auto* press_cmd = app.add_subcommand("press", "Simulate and dump a single press");
  press_cmd->add_option("--config", press.config, "Generator config JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  press_cmd->add_option("--out", press.out, "Output directory")->required();
  press_cmd->add_option("--shape", press.shape, "Probe cross-section")
      ->check(CLI::IsMember({"circle", "square", "triangle", "t_shape"}))
      ->capture_default_str();
  press_cmd->add_option("--hardness", press.hardness_ha, "Object hardness, Shore A")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  press_cmd->add_option("--depth", press.depth_mm, "Commanded press depth, mm")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  press_cmd->add_option("--seed", press.seed, "Noise seed")->capture_default_str();
  press_cmd->callback([&press] { cmd_press(press); });

  TrainOpts train;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  train_cmd->add_option("--data", train.data, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  auto* task_opt = train_cmd->add_option("--task", train.task, "Classification label set")
                       ->check(CLI::IsMember({"shape", "hardness", "joint"}));
  auto* mode_opt = train_cmd->add_option("--mode", train.mode, "Stream mode")
                       ->check(CLI::IsMember({"fused", "image_only", "force_only"}));
  train_cmd->add_option("--epochs", train.cfg.epochs, "Training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--batch", train.cfg.batch_size, "Minibatch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--lr", train.cfg.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--eval-batch", train.cfg.eval_batch_size, "Evaluation batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Training seed")->capture_default_str();
  train_cmd->callback([&train, task_opt, mode_opt] {
    train.task_given = task_opt->count() > 0;
    train.mode_given = mode_opt->count() > 0;
    cmd_train(train);
  });

  EvalOpts eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model on one split");
  eval_cmd->add_option("--model", eval.model, "Training output directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--data", eval.data, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", eval.out, "Output directory")->required();
  eval_cmd->add_option("--split", eval.split, "Dataset split")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--eval-batch", eval.eval_batch_size, "Evaluation batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->callback([&eval] { cmd_eval(eval); });

  AblateOpts ablate;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "Train fused and single-stream models on one budget");
  ablate_cmd->add_option("--data", ablate.data, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--out", ablate.out, "Output directory")->required();
  ablate_cmd->add_option("--task", ablate.task, "Classification label set")
      ->check(CLI::IsMember({"shape", "hardness", "joint"}))
      ->capture_default_str();
  ablate_cmd->add_option("--epochs", ablate.cfg.epochs, "Training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ablate_cmd->add_option("--batch", ablate.cfg.batch_size, "Minibatch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ablate_cmd->add_option("--lr", ablate.cfg.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ablate_cmd->add_option("--eval-batch", ablate.cfg.eval_batch_size, "Evaluation batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ablate_cmd->add_option("--seed", ablate.seed, "Training seed")->capture_default_str();
  ablate_cmd->callback([&ablate] { cmd_ablate(ablate); });

  BaselineOpts base;
  auto* base_cmd =
      app.add_subcommand("baseline", "Train the hand-crafted feature reference classifier");
  base_cmd->add_option("--data", base.data, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  base_cmd->add_option("--out", base.out, "Output directory")->required();
  base_cmd->add_option("--task", base.task, "Classification label set")
      ->check(CLI::IsMember({"shape", "hardness", "joint"}))
      ->capture_default_str();
  base_cmd->add_option("--epochs", base.cfg.epochs, "Training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  base_cmd->add_option("--batch", base.cfg.batch_size, "Minibatch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  base_cmd->add_option("--lr", base.cfg.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  base_cmd->add_option("--eval-batch", base.cfg.eval_batch_size, "Evaluation batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  base_cmd->add_option("--seed", base.seed, "Training seed")->capture_default_str();
  base_cmd->callback([&base] { cmd_baseline(base); });

  ReportOpts rep;
  auto* rep_cmd = app.add_subcommand("report", "Collate metric files for plotting");
  rep_cmd->add_option("inputs", rep.inputs, "Run directories or metric files")
      ->required()
      ->check(CLI::ExistingPath);
  rep_cmd->add_option("--out", rep.out, "Output directory")->required();
  rep_cmd->callback([&rep] { cmd_report(rep); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
