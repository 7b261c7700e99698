// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end subprocess tests of the taxel binary: exit-code taxonomy,
// write-once outputs, artifact determinism, and the full command chain from
// generation through report collation.

#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nlohmann/json.hpp"
#include "taxel/image.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Runs the CLI with the given arguments, output silenced; returns the exit
/// code.
int run(const std::string& args) {
  const std::string cmd = std::string(TAXEL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status))
    throw std::runtime_error("subprocess did not exit normally: " + cmd);
  return WEXITSTATUS(status);
}

void run_ok(const std::string& args) {
  const int code = run(args);
  if (code != 0)
    throw std::runtime_error("command failed with exit " + std::to_string(code) + ": " + args);
}

const fs::path& scratch() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / "taxel_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json slurp_json(const fs::path& path) { return json::parse(slurp(path)); }

/// Relative path -> file bytes for a whole directory tree.
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> m;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      m[fs::relative(entry.path(), root).generic_string()] = slurp(entry.path());
  return m;
}

const std::string kTinyClsConfig = R"({
  "hardness_levels": 2,
  "depths_mm": [0.3, 0.6],
  "reps": 3,
  "image_size": 32,
  "area_mm2": 4.0
})";

/// Shared classification dataset generated once through the CLI.
const fs::path& cls_dataset() {
  static const fs::path dir = [] {
    const fs::path cfg = scratch() / "tiny.json";
    write_file(cfg, kTinyClsConfig);
    const fs::path out = scratch() / "ds";
    run_ok("gen-data --config " + cfg.string() + " --out " + out.string() + " --seed 77");
    return out;
  }();
  return dir;
}

const fs::path& reg_dataset() {
  static const fs::path dir = [] {
    const fs::path cfg = scratch() / "reg.json";
    write_file(cfg, R"({"kind": "force_regression", "regression_samples": 40,
                        "image_size": 32, "area_mm2": 4.0})");
    const fs::path out = scratch() / "rds";
    run_ok("gen-data --config " + cfg.string() + " --out " + out.string() + " --seed 3");
    return out;
  }();
  return dir;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("usage errors exit 2, help exits 0") {
  CHECK(run("--help") == 0);
  CHECK(run("train --help") == 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("") == 2);                                          // missing subcommand
  CHECK(run("train --out x") == 2);                             // missing required flag
  CHECK(run("gen-data --config /no/such.json --out x") == 2);   // missing input file
  CHECK(run("eval --model /no/such --data /no/such --out x") == 2);
  const std::string ds = cls_dataset().string();
  CHECK(run("train --data " + ds + " --out " + (scratch() / "x_task").string() +
            " --task bogus") == 2);
}

TEST_CASE("gen-data is byte-identical across runs and refuses dirty outputs") {
  const fs::path ds1 = cls_dataset();
  const fs::path ds2 = scratch() / "ds_again";
  run_ok("gen-data --config " + (scratch() / "tiny.json").string() + " --out " + ds2.string() +
         " --seed 77 --jobs 2");
  CHECK(tree_bytes(ds1) == tree_bytes(ds2));
  // Write-once: the populated directory is refused with a domain error.
  CHECK(run("gen-data --config " + (scratch() / "tiny.json").string() + " --out " +
            ds1.string() + " --seed 77") == 1);
}

TEST_CASE("calibrate, press, reconstruct round trip") {
  const fs::path cal = scratch() / "cal";
  run_ok("calibrate --out " + cal.string() + " --image-size 32");
  const fs::path press = scratch() / "press";
  run_ok("press --config " + (scratch() / "tiny.json").string() + " --out " + press.string() +
         " --shape square --hardness 60 --depth 0.8 --seed 9");
  const json meta = slurp_json(press / "press.json");
  const int n_frames = meta.at("n_frames").get<int>();
  const double imprint = meta.at("imprint_mm").get<double>();
  CHECK(n_frames == 17);  // 1.6 s ramp at 10 Hz plus the t = 0 reference
  CHECK(imprint == doctest::Approx(0.4));

  char last[24];
  std::snprintf(last, sizeof(last), "frame_%02d.png", n_frames - 1);
  const std::string lut = (cal / "lut.json").string();
  const std::string ref = (press / "frame_00.png").string();

  // The zero-difference pair decodes to an exactly zero depth map.
  const fs::path zero_out = scratch() / "rec_zero";
  run_ok("reconstruct --frame " + ref + " --ref " + ref + " --lut " + lut + " --out " +
         zero_out.string());
  const taxel::HeightField flat = taxel::read_raw((zero_out / "depth.raw").string());
  double peak = 0.0;
  for (double v : flat.data) peak = std::max(peak, std::abs(v));
  CHECK(peak == 0.0);
  CHECK_FALSE(slurp_json(zero_out / "region.json").at("contact").get<bool>());

  // The final frame recovers the commanded imprint and footprint area.
  const fs::path rec_out = scratch() / "rec_full";
  run_ok("reconstruct --frame " + (press / last).string() + " --ref " + ref + " --lut " + lut +
         " --out " + rec_out.string());
  const json region = slurp_json(rec_out / "region.json");
  CHECK(region.at("contact").get<bool>());
  CHECK(region.at("max_depth_mm").get<double>() == doctest::Approx(imprint).epsilon(0.25));
  CHECK(region.at("area_mm2").get<double>() > 2.5);
  CHECK(region.at("area_mm2").get<double>() < 5.5);
}

TEST_CASE("train and eval: artifacts, determinism, confusion accounting") {
  const std::string ds = cls_dataset().string();
  const fs::path run1 = scratch() / "train1";
  const fs::path run2 = scratch() / "train2";
  const std::string flags = " --task shape --epochs 2 --seed 5";
  run_ok("train --data " + ds + " --out " + run1.string() + flags);
  run_ok("train --data " + ds + " --out " + run2.string() + flags);
  for (const char* name : {"config.resolved.json", "model.json", "checkpoint.bin", "history.csv",
                           "summary.json"})
    CHECK(fs::exists(run1 / name));
  CHECK(tree_bytes(run1) == tree_bytes(run2));
  CHECK(slurp_json(run1 / "model.json").at("kind").get<std::string>() == "classifier");

  const fs::path ev = scratch() / "eval1";
  run_ok("eval --model " + run1.string() + " --data " + ds + " --out " + ev.string() +
         " --split test");
  const json report = slurp_json(ev / "report.json");
  CHECK(report.at("task").get<std::string>() == "shape");
  const double acc = report.at("accuracy").get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  // Trace plus off-diagonal mass accounts for the whole split.
  int total = 0;
  for (const auto& row : report.at("confusion"))
    for (const auto& cell : row) total += cell.get<int>();
  CHECK(total == report.at("total").get<int>());
  CHECK(total == 8);  // 48 samples, 1 test draw per joint class
}

TEST_CASE("regression datasets auto-detect the regressor and reject --task") {
  const std::string ds = reg_dataset().string();
  CHECK(run("train --data " + ds + " --out " + (scratch() / "x_reg").string() +
            " --task shape") == 2);
  const fs::path rrun = scratch() / "reg_train";
  run_ok("train --data " + ds + " --out " + rrun.string() + " --epochs 2 --seed 5");
  CHECK(slurp_json(rrun / "model.json").at("kind").get<std::string>() == "regressor");

  const fs::path ev = scratch() / "reg_eval";
  run_ok("eval --model " + rrun.string() + " --data " + ds + " --out " + ev.string());
  const json metrics = slurp_json(ev / "metrics.json");
  CHECK(metrics.at("kind").get<std::string>() == "regressor");
  CHECK(metrics.at("count").get<int>() == 6);  // test split of 40
  CHECK(metrics.at("mae_n").get<double>() >= 0.0);
  // Header plus one prediction row per test sample.
  const std::string rows = slurp(ev / "predictions.csv");
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 7);
}

TEST_CASE("ablate emits three matched runs and the fusion margin") {
  const fs::path out = scratch() / "ablate";
  run_ok("ablate --data " + cls_dataset().string() + " --out " + out.string() +
         " --task shape --epochs 1 --seed 5");
  const json ab = slurp_json(out / "ablation.json");
  double best_single = 0.0;
  for (const char* mode : {"fused", "image_only", "force_only"}) {
    CHECK(fs::exists(out / mode / "report.json"));
    CHECK(fs::exists(out / mode / "confusion.csv"));
    CHECK(fs::exists(out / mode / "checkpoint.bin"));
    if (std::string(mode) != "fused")
      best_single =
          std::max(best_single, ab.at("modes").at(mode).at("test_accuracy").get<double>());
  }
  const double fused = ab.at("modes").at("fused").at("test_accuracy").get<double>();
  CHECK(ab.at("fused_minus_best_single").get<double>() ==
        doctest::Approx(fused - best_single).epsilon(1e-12));
}

TEST_CASE("baseline trains on hand-crafted features and reports both splits") {
  const fs::path out = scratch() / "baseline";
  run_ok("baseline --data " + cls_dataset().string() + " --out " + out.string() +
         " --task hardness --epochs 40 --seed 5");
  CHECK(fs::exists(out / "report.val.json"));
  CHECK(fs::exists(out / "confusion.test.csv"));
  const json summary = slurp_json(out / "summary.json");
  CHECK(summary.at("kind").get<std::string>() == "baseline");
  CHECK(summary.at("test_accuracy").get<double>() ==
        slurp_json(out / "report.test.json").at("accuracy").get<double>());
}

TEST_CASE("report collates recursively and re-runs byte-identically") {
  const fs::path rep1 = scratch() / "rep1";
  const fs::path rep2 = scratch() / "rep2";
  const std::string inputs =
      (scratch() / "train1").string() + " " + (scratch() / "eval1").string() + " " +
      (scratch() / "ablate").string() + " " + (scratch() / "baseline").string();
  run_ok("report " + inputs + " --out " + rep1.string());
  run_ok("report " + inputs + " --out " + rep2.string());
  CHECK(tree_bytes(rep1) == tree_bytes(rep2));

  const std::string csv = slurp(rep1 / "metrics.csv");
  CHECK(csv.rfind("path,type,kind,task,mode,split,metric,value\n", 0) == 0);
  CHECK(csv.find("eval_report") != std::string::npos);
  CHECK(csv.find("ablation") != std::string::npos);
  CHECK(csv.find("train_summary") != std::string::npos);
  const json collated = slurp_json(rep1 / "report.json");
  // train1 summary; eval1 report; ablate: ablation + 3 x (report + summary);
  // baseline: summary + val and test reports.
  CHECK(collated.at("sources").size() == 12);
}

TEST_SUITE_END();
