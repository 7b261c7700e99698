// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "taxel/trainer.hpp"

using namespace taxel;
using namespace taxel::trainer;
namespace fs = std::filesystem;

namespace {

/// Generates one small shared classification dataset: 4 shapes x 2 hardness
/// x 2 depths x 3 reps at a 32 px raster. Six samples per joint class is
/// the smallest count that populates every split (4 train, 1 val, 1 test).
const dataset::Dataset& tiny_dataset() {
  static const dataset::Dataset ds = [] {
    const fs::path dir = fs::temp_directory_path() / "taxel_test_trainer_ds";
    fs::remove_all(dir);
    dataset::GenConfig cfg;
    cfg.hardness_levels = 2;
    cfg.depths_mm = {0.3, 0.6};
    cfg.reps = 3;
    cfg.image_size = 32;
    cfg.area_mm2 = 4.0;
    dataset::generate_dataset(cfg, dir.string(), 77, 2);
    return dataset::Dataset::load(dir.string());
  }();
  return ds;
}

twostream::Model make_model(dataset::Task task, twostream::StreamMode mode) {
  twostream::ModelConfig mc;
  mc.mode = mode;
  mc.image_size = 32;
  mc.force_len = 64;
  mc.num_classes = tiny_dataset().manifest().num_classes(task);
  return twostream::Model(mc);
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("confusion accounting: totals, trace, and per-class rates") {
  EvalReport rep;
  rep.num_classes = 2;
  rep.counts = {8, 2, 1, 9};
  rep.class_names = {"a", "b"};
  rep.task = "shape";
  rep.mode = "fused";
  rep.split = "test";
  // Rebuild through the JSON round trip to exercise both directions.
  EvalReport computed = rep;
  computed.total = 20;
  computed.correct = 17;
  computed.accuracy = 0.85;
  computed.per_class_accuracy = {0.8, 0.9};
  const std::string text = eval_report_to_json(computed);
  const EvalReport back = eval_report_from_json(text);
  CHECK(back.total == 20);
  CHECK(back.correct == 17);
  CHECK(back.accuracy == doctest::Approx(0.85));
  CHECK(back.at(0, 1) == 2);
  CHECK(back.at(1, 0) == 1);
  CHECK(eval_report_to_json(back) == text);  // byte-stable re-emission
}

TEST_CASE("confusion csv lists class names and counts") {
  EvalReport rep;
  rep.num_classes = 2;
  rep.counts = {3, 0, 1, 4};
  rep.class_names = {"circle", "square"};
  const std::string csv = confusion_csv(rep);
  CHECK(csv == "truth\\pred,circle,square\ncircle,3,0\nsquare,1,4\n");
}

TEST_CASE("history csv holds one line per epoch") {
  std::vector<EpochStats> hist{{0, 1.5, 1.25, 0.5}, {1, 0.75, 0.5, 0.875}};
  const std::string csv = history_csv(hist);
  CHECK(csv == "epoch,train_loss,val_loss,val_metric\n0,1.5,1.25,0.5\n1,0.75,0.5,0.875\n");
}

TEST_CASE("class names follow the manifest for every task") {
  const auto& m = tiny_dataset().manifest();
  const auto shape = class_names(m, dataset::Task::Shape);
  REQUIRE(shape.size() == 4);
  CHECK(shape[0] == "circle");
  const auto hardness = class_names(m, dataset::Task::Hardness);
  REQUIRE(hardness.size() == 2);
  CHECK(hardness[0] == "ha10");
  CHECK(hardness[1] == "ha80");
  const auto joint = class_names(m, dataset::Task::Joint);
  REQUIRE(joint.size() == 8);
  CHECK(joint[0] == "circle_ha10");
  CHECK(joint.back() == "t_shape_ha80");
}

TEST_CASE("classifier training learns the tiny shape task and is deterministic") {
  const auto& ds = tiny_dataset();
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.learning_rate = 2e-3;

  auto model_a = make_model(dataset::Task::Shape, twostream::StreamMode::Fused);
  const TrainResult res_a = train_classifier(model_a, ds, dataset::Task::Shape, cfg, 5);
  REQUIRE(res_a.history.size() == 4);
  CHECK(!res_a.aborted_nan);
  CHECK(res_a.best_epoch >= 0);
  // Loss drops and the tiny task becomes mostly separable.
  CHECK(res_a.history.back().train_loss < res_a.history.front().train_loss);
  CHECK(res_a.best_val_metric >= 0.5);

  // The restored parameters reproduce the best validation accuracy.
  const EvalReport val = evaluate_classifier(model_a, ds, dataset::Task::Shape, "val");
  CHECK(val.accuracy == doctest::Approx(res_a.best_val_metric).epsilon(1e-12));
  CHECK(val.total == static_cast<int>(ds.split_indices("val").size()));

  // Same seed, fresh model: identical history and evaluation.
  auto model_b = make_model(dataset::Task::Shape, twostream::StreamMode::Fused);
  const TrainResult res_b = train_classifier(model_b, ds, dataset::Task::Shape, cfg, 5);
  REQUIRE(res_b.history.size() == res_a.history.size());
  for (std::size_t i = 0; i < res_a.history.size(); ++i) {
    CHECK(res_b.history[i].train_loss == res_a.history[i].train_loss);
    CHECK(res_b.history[i].val_loss == res_a.history[i].val_loss);
    CHECK(res_b.history[i].val_metric == res_a.history[i].val_metric);
  }
  const EvalReport test_a = evaluate_classifier(model_a, ds, dataset::Task::Shape, "test");
  const EvalReport test_b = evaluate_classifier(model_b, ds, dataset::Task::Shape, "test");
  CHECK(eval_report_to_json(test_a) == eval_report_to_json(test_b));

  // A different seed changes the trajectory.
  auto model_c = make_model(dataset::Task::Shape, twostream::StreamMode::Fused);
  const TrainResult res_c = train_classifier(model_c, ds, dataset::Task::Shape, cfg, 6);
  CHECK(res_c.history.front().train_loss != res_a.history.front().train_loss);
}

TEST_CASE("a diverging run aborts on the first non-finite loss and keeps finite params") {
  const auto& ds = tiny_dataset();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 1e200;  // guarantees overflow after the first step
  auto model = make_model(dataset::Task::Shape, twostream::StreamMode::Fused);
  const TrainResult res = train_classifier(model, ds, dataset::Task::Shape, cfg, 5);
  CHECK(res.aborted_nan);
  CHECK(res.best_epoch == -1);
  for (double v : model.store().flat_values()) CHECK(std::isfinite(v));
}

TEST_CASE("single stream modes train through the same loop") {
  const auto& ds = tiny_dataset();
  TrainConfig cfg;
  cfg.epochs = 1;
  auto model = make_model(dataset::Task::Shape, twostream::StreamMode::ForceOnly);
  const TrainResult res = train_classifier(model, ds, dataset::Task::Shape, cfg, 5);
  CHECK(res.history.size() == 1);
  const EvalReport rep = evaluate_classifier(model, ds, dataset::Task::Shape, "test");
  CHECK(rep.mode == "force_only");
  CHECK(rep.total == static_cast<int>(ds.split_indices("test").size()));
}

TEST_CASE("regressor training reduces the validation error in newtons") {
  const fs::path dir = fs::temp_directory_path() / "taxel_test_trainer_reg";
  fs::remove_all(dir);
  dataset::GenConfig cfg;
  cfg.kind = dataset::DatasetKind::ForceRegression;
  cfg.regression_samples = 60;
  cfg.image_size = 32;
  cfg.area_mm2 = 4.0;
  dataset::generate_dataset(cfg, dir.string(), 19, 2);
  const dataset::Dataset ds = dataset::Dataset::load(dir.string());

  twostream::ForceRegressor model(32);
  TrainConfig tc;
  tc.epochs = 6;
  tc.learning_rate = 2e-3;
  const TrainResult res = train_regressor(model, ds, tc, 9);
  REQUIRE(res.history.size() == 6);
  CHECK(!res.aborted_nan);
  CHECK(res.history.back().val_metric < res.history.front().val_metric);
  const double val_mae = evaluate_regressor_mae(model, ds, "val");
  CHECK(val_mae == doctest::Approx(res.best_val_metric).epsilon(1e-9));
  CHECK(val_mae < 12.0);
  fs::remove_all(dir);
}

TEST_CASE("the manual baseline separates hardness from its two features") {
  const auto& ds = tiny_dataset();
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-2;
  const BaselineOutcome out = train_manual_baseline(ds, dataset::Task::Hardness, cfg, 3);
  CHECK(!out.result.aborted_nan);
  // Two hardness levels a factor 8 apart in stiffness are easy for the
  // stiffness feature.
  CHECK(out.test_report.accuracy >= 0.75);
  CHECK(out.test_report.mode == "manual_baseline");
  CHECK(out.test_report.total == static_cast<int>(ds.split_indices("test").size()));
  // Deterministic reports.
  const BaselineOutcome again = train_manual_baseline(ds, dataset::Task::Hardness, cfg, 3);
  CHECK(eval_report_to_json(again.test_report) == eval_report_to_json(out.test_report));
}

TEST_SUITE_END();
