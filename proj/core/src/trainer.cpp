// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace taxel::trainer {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<int> argmax_rows(const nn::Tensor& logits) {
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    int best = 0;
    for (int c = 1; c < k; ++c)
      if (logits.data[static_cast<std::size_t>(r) * k + c] >
          logits.data[static_cast<std::size_t>(r) * k + best])
        best = c;
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

EvalReport report_from_counts(std::vector<int> counts, int num_classes) {
  EvalReport rep;
  rep.num_classes = num_classes;
  rep.counts = std::move(counts);
  for (int t = 0; t < num_classes; ++t) {
    int row = 0;
    for (int p = 0; p < num_classes; ++p) row += rep.at(t, p);
    rep.total += row;
    rep.correct += rep.at(t, t);
    rep.per_class_accuracy.push_back(row > 0 ? static_cast<double>(rep.at(t, t)) / row : 0.0);
  }
  rep.accuracy = rep.total > 0 ? static_cast<double>(rep.correct) / rep.total : 0.0;
  return rep;
}

std::vector<double> snapshot(const nn::ParamStore& store) {
  const auto vals = store.flat_values();
  return {vals.begin(), vals.end()};
}

void restore(nn::ParamStore& store, const std::vector<double>& params) {
  auto vals = store.flat_values();
  std::copy(params.begin(), params.end(), vals.begin());
}

/// Shared epoch driver: shuffles, steps Adam over minibatches, tracks the
/// best validation metric, and restores the best parameters on return.
/// step_batch returns the mean loss or NaN; eval_epoch returns
/// (val_loss, val_metric); higher_better selects the retention direction.
template <typename StepFn, typename EvalFn>
TrainResult run_epochs(nn::ParamStore& store, std::vector<int> train_idx,
                       const TrainConfig& cfg, std::uint64_t seed, bool higher_better,
                       StepFn&& step_batch, EvalFn&& eval_epoch) {
  cfg.validate();
  if (train_idx.empty()) throw std::invalid_argument("train: empty train split");
  nn::Adam opt(store.total_size(), cfg.learning_rate);

  TrainResult res;
  std::vector<double> best = snapshot(store);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffler(derive_seed(seed, static_cast<std::uint64_t>(epoch) + 1));
    shuffler.shuffle(train_idx);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < train_idx.size() && !res.aborted_nan;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(cfg.batch_size), train_idx.size() - start);
      const std::span<const int> bidx(train_idx.data() + start, count);
      const double loss = step_batch(bidx, opt);
      // A diverging step can corrupt parameters while the loss itself is
      // still finite (saturating layers absorb the overflow), so guard both.
      bool bad = !std::isfinite(loss);
      for (std::size_t i = 0; !bad && i < store.total_size(); ++i)
        bad = !std::isfinite(store.flat_values()[i]);
      if (bad) {
        res.aborted_nan = true;
        break;
      }
      loss_sum += loss * static_cast<double>(count);
      seen += count;
    }
    if (res.aborted_nan) break;

    const auto [val_loss, val_metric] = eval_epoch();
    if (!std::isfinite(val_loss) || !std::isfinite(val_metric)) {
      res.aborted_nan = true;
      break;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(seen);
    stats.val_loss = val_loss;
    stats.val_metric = val_metric;
    res.history.push_back(stats);

    const bool better = res.best_epoch < 0 ||
                        (higher_better ? val_metric > res.best_val_metric
                                       : val_metric < res.best_val_metric);
    if (better) {
      res.best_epoch = epoch;
      res.best_val_metric = val_metric;
      best = snapshot(store);
    }
  }
  restore(store, best);
  return res;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (eval_batch_size < 1)
    throw std::invalid_argument("TrainConfig: eval_batch_size must be >= 1");
}

std::string eval_report_to_json(const EvalReport& rep) {
  json j;
  j["schema_version"] = dataset::kSchemaVersion;
  j["task"] = rep.task;
  j["mode"] = rep.mode;
  j["split"] = rep.split;
  j["num_classes"] = rep.num_classes;
  j["total"] = rep.total;
  j["correct"] = rep.correct;
  j["accuracy"] = rep.accuracy;
  j["class_names"] = rep.class_names;
  j["per_class_accuracy"] = rep.per_class_accuracy;
  json rows = json::array();
  for (int t = 0; t < rep.num_classes; ++t) {
    json row = json::array();
    for (int p = 0; p < rep.num_classes; ++p) row.push_back(rep.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
  const json j = json::parse(text);
  EvalReport rep;
  rep.task = j.at("task").get<std::string>();
  rep.mode = j.at("mode").get<std::string>();
  rep.split = j.at("split").get<std::string>();
  rep.num_classes = j.at("num_classes").get<int>();
  rep.total = j.at("total").get<int>();
  rep.correct = j.at("correct").get<int>();
  rep.accuracy = j.at("accuracy").get<double>();
  rep.class_names = j.at("class_names").get<std::vector<std::string>>();
  rep.per_class_accuracy = j.at("per_class_accuracy").get<std::vector<double>>();
  for (const json& row : j.at("confusion"))
    for (const json& v : row) rep.counts.push_back(v.get<int>());
  if (rep.counts.size() !=
      static_cast<std::size_t>(rep.num_classes) * static_cast<std::size_t>(rep.num_classes))
    throw std::runtime_error("eval report: confusion size mismatch");
  return rep;
}

std::string confusion_csv(const EvalReport& rep) {
  std::string text = "truth\\pred";
  for (const std::string& name : rep.class_names) text += "," + name;
  text += '\n';
  for (int t = 0; t < rep.num_classes; ++t) {
    text += rep.class_names[static_cast<std::size_t>(t)];
    for (int p = 0; p < rep.num_classes; ++p) text += ',' + std::to_string(rep.at(t, p));
    text += '\n';
  }
  return text;
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string text = "epoch,train_loss,val_loss,val_metric\n";
  for (const EpochStats& s : history) {
    text += std::to_string(s.epoch);
    text += ',' + format_double(s.train_loss);
    text += ',' + format_double(s.val_loss);
    text += ',' + format_double(s.val_metric);
    text += '\n';
  }
  return text;
}

std::vector<std::string> class_names(const dataset::Manifest& m, dataset::Task task) {
  auto ha_name = [](double ha) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "ha%g", ha);
    return std::string(buf);
  };
  std::vector<std::string> names;
  switch (task) {
    case dataset::Task::Shape:
      return m.shape_names;
    case dataset::Task::Hardness:
      for (double ha : m.hardness_levels_ha) names.push_back(ha_name(ha));
      return names;
    case dataset::Task::Joint:
      for (const std::string& shape : m.shape_names)
        for (double ha : m.hardness_levels_ha) names.push_back(shape + "_" + ha_name(ha));
      return names;
  }
  throw std::invalid_argument("class_names: unknown task");
}

TrainResult train_classifier(twostream::Model& model, const dataset::Dataset& data,
                             dataset::Task task, const TrainConfig& cfg, std::uint64_t seed) {
  const dataset::Manifest& m = data.manifest();
  if (m.num_classes(task) != model.config().num_classes)
    throw std::invalid_argument("train_classifier: model class count mismatch");
  Rng init_rng(derive_seed(seed, 0));
  model.init(init_rng);

  const std::vector<int> val_idx = data.split_indices("val");
  if (val_idx.empty()) throw std::invalid_argument("train_classifier: empty val split");
  nn::ParamStore& store = model.store();

  auto step_batch = [&](std::span<const int> bidx, nn::Adam& opt) {
    const nn::Tensor depth = data.depth_batch(bidx);
    const nn::Tensor force = data.force_batch(bidx);
    const std::vector<int> labels = data.labels(bidx, task);
    twostream::Model::Pass pass;
    const nn::Tensor logits = model.forward(depth, force, pass);
    const nn::LossGrad lg = nn::softmax_cross_entropy(logits, labels);
    if (!std::isfinite(lg.loss)) return lg.loss;
    store.zero_grads();
    model.backward(lg.grad, pass);
    opt.step(store.flat_values(), store.flat_grads());
    return lg.loss;
  };
  auto eval_epoch = [&]() {
    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t start = 0; start < val_idx.size();
         start += static_cast<std::size_t>(cfg.eval_batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(cfg.eval_batch_size), val_idx.size() - start);
      const std::span<const int> bidx(val_idx.data() + start, count);
      const nn::Tensor logits =
          model.predict(data.depth_batch(bidx), data.force_batch(bidx));
      const std::vector<int> labels = data.labels(bidx, task);
      loss_sum += nn::softmax_cross_entropy(logits, labels).loss *
                  static_cast<double>(count);
      const std::vector<int> preds = argmax_rows(logits);
      for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++correct;
    }
    const double n = static_cast<double>(val_idx.size());
    return std::pair<double, double>(loss_sum / n, static_cast<double>(correct) / n);
  };
  return run_epochs(store, data.split_indices("train"), cfg, seed, /*higher_better=*/true,
                    step_batch, eval_epoch);
}

EvalReport evaluate_classifier(twostream::Model& model, const dataset::Dataset& data,
                               dataset::Task task, const std::string& split,
                               int eval_batch_size) {
  const dataset::Manifest& m = data.manifest();
  const int k = m.num_classes(task);
  const std::vector<int> idx = data.split_indices(split);
  std::vector<int> counts(static_cast<std::size_t>(k) * k, 0);
  for (std::size_t start = 0; start < idx.size();
       start += static_cast<std::size_t>(eval_batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(eval_batch_size), idx.size() - start);
    const std::span<const int> bidx(idx.data() + start, count);
    const nn::Tensor logits = model.predict(data.depth_batch(bidx), data.force_batch(bidx));
    const std::vector<int> labels = data.labels(bidx, task);
    const std::vector<int> preds = argmax_rows(logits);
    for (std::size_t i = 0; i < preds.size(); ++i)
      ++counts[static_cast<std::size_t>(labels[i]) * k + preds[i]];
  }
  EvalReport rep = report_from_counts(std::move(counts), k);
  rep.task = dataset::task_name(task);
  rep.mode = twostream::stream_mode_name(model.config().mode);
  rep.split = split;
  rep.class_names = class_names(m, task);
  return rep;
}

TrainResult train_regressor(twostream::ForceRegressor& model, const dataset::Dataset& data,
                            const TrainConfig& cfg, std::uint64_t seed) {
  Rng init_rng(derive_seed(seed, 0));
  model.init(init_rng);
  const double full_scale = data.manifest().force_full_scale_n;
  const std::vector<int> val_idx = data.split_indices("val");
  if (val_idx.empty()) throw std::invalid_argument("train_regressor: empty val split");
  nn::ParamStore& store = model.store();

  auto target_tensor = [&](std::span<const int> bidx) {
    const std::vector<double> newtons = data.targets(bidx);
    nn::Tensor t({static_cast<int>(bidx.size()), 1});
    for (std::size_t i = 0; i < newtons.size(); ++i) t.data[i] = newtons[i] / full_scale;
    return t;
  };
  auto step_batch = [&](std::span<const int> bidx, nn::Adam& opt) {
    nn::Tape tape;
    const nn::Tensor pred = model.forward(data.diff_batch(bidx), tape);
    const nn::LossGrad lg = nn::mse_loss(pred, target_tensor(bidx));
    if (!std::isfinite(lg.loss)) return lg.loss;
    store.zero_grads();
    model.backward(lg.grad, tape);
    opt.step(store.flat_values(), store.flat_grads());
    return lg.loss;
  };
  auto eval_epoch = [&]() {
    double loss_sum = 0.0;
    double abs_sum = 0.0;
    for (std::size_t start = 0; start < val_idx.size();
         start += static_cast<std::size_t>(cfg.eval_batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(cfg.eval_batch_size), val_idx.size() - start);
      const std::span<const int> bidx(val_idx.data() + start, count);
      const nn::Tensor pred = model.predict(data.diff_batch(bidx));
      const nn::Tensor target = target_tensor(bidx);
      loss_sum += nn::mse_loss(pred, target).loss * static_cast<double>(count);
      for (std::size_t i = 0; i < pred.size(); ++i)
        abs_sum += std::abs(pred.data[i] - target.data[i]) * full_scale;
    }
    const double n = static_cast<double>(val_idx.size());
    return std::pair<double, double>(loss_sum / n, abs_sum / n);
  };
  return run_epochs(store, data.split_indices("train"), cfg, seed, /*higher_better=*/false,
                    step_batch, eval_epoch);
}

double evaluate_regressor_mae(twostream::ForceRegressor& model, const dataset::Dataset& data,
                              const std::string& split, int eval_batch_size) {
  const double full_scale = data.manifest().force_full_scale_n;
  const std::vector<int> idx = data.split_indices(split);
  if (idx.empty()) throw std::invalid_argument("evaluate_regressor_mae: empty split");
  double abs_sum = 0.0;
  for (std::size_t start = 0; start < idx.size();
       start += static_cast<std::size_t>(eval_batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(eval_batch_size), idx.size() - start);
    const std::span<const int> bidx(idx.data() + start, count);
    const nn::Tensor pred = model.predict(data.diff_batch(bidx));
    const std::vector<double> newtons = data.targets(bidx);
    for (std::size_t i = 0; i < newtons.size(); ++i)
      abs_sum += std::abs(pred.data[i] * full_scale - newtons[i]);
  }
  return abs_sum / static_cast<double>(idx.size());
}

namespace {

/// (radius, stiffness) rows standardized by train-split statistics.
class BaselineFeatures {
 public:
  BaselineFeatures(const dataset::Dataset& data) : manifest_(data.manifest()) {
    const std::vector<int> train = data.split_indices("train");
    double sum[2] = {0, 0}, sum2[2] = {0, 0};
    for (int i : train) {
      const auto& s = manifest_.samples[static_cast<std::size_t>(i)];
      const double f[2] = {s.baseline_radius_mm, s.baseline_stiffness};
      for (int c = 0; c < 2; ++c) { sum[c] += f[c]; sum2[c] += f[c] * f[c]; }
    }
    const double n = static_cast<double>(train.size());
    for (int c = 0; c < 2; ++c) {
      mean_[c] = sum[c] / n;
      std_[c] = std::max(std::sqrt(std::max(sum2[c] / n - mean_[c] * mean_[c], 0.0)), 1e-12);
    }
  }

  nn::Tensor batch(std::span<const int> idx) const {
    nn::Tensor t({static_cast<int>(idx.size()), 2});
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& s = manifest_.samples[static_cast<std::size_t>(idx[k])];
      t.data[2 * k] = (s.baseline_radius_mm - mean_[0]) / std_[0];
      t.data[2 * k + 1] = (s.baseline_stiffness - mean_[1]) / std_[1];
    }
    return t;
  }

 private:
  const dataset::Manifest& manifest_;
  double mean_[2] = {0, 0};
  double std_[2] = {1, 1};
};

}  // namespace

BaselineOutcome train_manual_baseline(const dataset::Dataset& data, dataset::Task task,
                                      const TrainConfig& cfg, std::uint64_t seed) {
  const dataset::Manifest& m = data.manifest();
  const int k = m.num_classes(task);
  const BaselineFeatures features(data);

  nn::ParamStore store;
  nn::Network net(store);
  net.add<nn::Dense>(store, "base.fc1", 2, 32);
  net.add<nn::Relu>();
  net.add<nn::Dense>(store, "base.fc2", 32, k);
  Rng init_rng(derive_seed(seed, 0));
  net.init(init_rng);

  const std::vector<int> val_idx = data.split_indices("val");
  if (val_idx.empty()) throw std::invalid_argument("train_manual_baseline: empty val split");
  auto step_batch = [&](std::span<const int> bidx, nn::Adam& opt) {
    nn::Tape tape;
    const nn::Tensor logits = net.forward(features.batch(bidx), tape);
    const nn::LossGrad lg = nn::softmax_cross_entropy(logits, data.labels(bidx, task));
    if (!std::isfinite(lg.loss)) return lg.loss;
    store.zero_grads();
    net.backward(lg.grad, tape);
    opt.step(store.flat_values(), store.flat_grads());
    return lg.loss;
  };
  auto eval_epoch = [&]() {
    const nn::Tensor logits = net.predict(features.batch(val_idx));
    const std::vector<int> labels = data.labels(val_idx, task);
    const double loss = nn::softmax_cross_entropy(logits, labels).loss;
    const std::vector<int> preds = argmax_rows(logits);
    int correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i] == labels[i]) ++correct;
    return std::pair<double, double>(loss, static_cast<double>(correct) /
                                               static_cast<double>(val_idx.size()));
  };

  BaselineOutcome out;
  out.result = run_epochs(store, data.split_indices("train"), cfg, seed,
                          /*higher_better=*/true, step_batch, eval_epoch);

  auto report_split = [&](const std::string& split) {
    const std::vector<int> idx = data.split_indices(split);
    std::vector<int> counts(static_cast<std::size_t>(k) * k, 0);
    const nn::Tensor logits = net.predict(features.batch(idx));
    const std::vector<int> labels = data.labels(idx, task);
    const std::vector<int> preds = argmax_rows(logits);
    for (std::size_t i = 0; i < preds.size(); ++i)
      ++counts[static_cast<std::size_t>(labels[i]) * k + preds[i]];
    EvalReport rep = report_from_counts(std::move(counts), k);
    rep.task = dataset::task_name(task);
    rep.mode = "manual_baseline";
    rep.split = split;
    rep.class_names = class_names(m, task);
    return rep;
  };
  out.val_report = report_split("val");
  out.test_report = report_split("test");
  return out;
}

}  // namespace taxel::trainer
