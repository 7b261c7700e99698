// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded training and evaluation loops over loaded datasets: minibatch Adam
// with per-epoch reshuffles, best-validation parameter retention, NaN abort
// with the last good parameters restored, confusion-matrix evaluation, and
// a two-feature reference classifier over hand-crafted contact features.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taxel/dataset.hpp"
#include "taxel/twostream.hpp"

namespace taxel::trainer {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-3;
  int eval_batch_size = 32;

  void validate() const;
};

/// One line of the training history. val_metric is classification accuracy
/// for classifiers and mean absolute error in newtons for the regressor.
struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_metric = 0.0;
  bool aborted_nan = false;  // stopped on a non-finite loss; best params kept
};

/// Confusion-matrix evaluation of one split. counts is row-major with rows
/// indexing the true class and columns the prediction.
struct EvalReport {
  std::string task;
  std::string mode;
  std::string split;
  int num_classes = 0;
  int total = 0;
  int correct = 0;
  double accuracy = 0.0;
  std::vector<std::string> class_names;
  std::vector<int> counts;
  std::vector<double> per_class_accuracy;

  int at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * num_classes + pred];
  }
};

std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);

/// CSV rendering of the confusion matrix with class-name headers.
std::string confusion_csv(const EvalReport& report);

/// CSV rendering of the training history.
std::string history_csv(const std::vector<EpochStats>& history);

/// Human-readable class names for a task, from the dataset manifest.
std::vector<std::string> class_names(const dataset::Manifest& manifest, dataset::Task task);

/// Initializes and trains the classifier on the train split, tracking
/// validation accuracy each epoch. On return the model holds the best
/// validation parameters. Deterministic per (model config, data, cfg, seed).
TrainResult train_classifier(twostream::Model& model, const dataset::Dataset& data,
                             dataset::Task task, const TrainConfig& cfg, std::uint64_t seed);

EvalReport evaluate_classifier(twostream::Model& model, const dataset::Dataset& data,
                               dataset::Task task, const std::string& split,
                               int eval_batch_size = 32);

/// Initializes and trains the force regressor against targets normalized by
/// the dataset's full-scale force; val_metric is MAE in newtons.
TrainResult train_regressor(twostream::ForceRegressor& model, const dataset::Dataset& data,
                            const TrainConfig& cfg, std::uint64_t seed);

double evaluate_regressor_mae(twostream::ForceRegressor& model, const dataset::Dataset& data,
                              const std::string& split, int eval_batch_size = 32);

/// Reference classifier over the two hand-crafted features (contact radius,
/// inferred object stiffness): a small dense network trained with the same
/// loop. Returns the history plus val and test reports.
struct BaselineOutcome {
  TrainResult result;
  EvalReport val_report;
  EvalReport test_report;
};

BaselineOutcome train_manual_baseline(const dataset::Dataset& data, dataset::Task task,
                                      const TrainConfig& cfg, std::uint64_t seed);

}  // namespace taxel::trainer
