#include "falldet/har/evaluation.hpp"

#include <cstdio>

#include "falldet/error.hpp"

namespace falldet::har {

Evaluation evaluate_predictions(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes) {
  if (truth.size() != predicted.size()) throw DimensionError("truth and prediction counts differ");
  Evaluation e;
  e.total = truth.size();
  e.counts.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  e.class_counts.assign(n_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes) {
      throw ConfigError("class id out of range in evaluation");
    }
    ++e.counts[t][p];
    ++e.class_counts[t];
    if (t == p) ++correct;
  }
  e.confusion.assign(n_classes, {});
  for (std::size_t i = 0; i < n_classes; ++i) {
    if (e.class_counts[i] == 0) continue;
    e.confusion[i].resize(n_classes);
    for (std::size_t j = 0; j < n_classes; ++j) {
      e.confusion[i][j] = static_cast<double>(e.counts[i][j]) / static_cast<double>(e.class_counts[i]);
    }
  }
  e.accuracy = e.total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(e.total);
  return e;
}

Evaluation evaluate(const HarModel& model, std::span<const csi::AmplitudeWindow> test_set) {
  if (test_set.empty()) throw ConfigError("evaluation needs a non-empty test set");
  std::vector<int> truth;
  for (const auto& w : test_set) {
    if (!w.label) throw ConfigError("test window '" + w.source_id + "' is unlabelled");
    truth.push_back(*w.label);
  }
  const auto predicted = model.predict(test_set);
  return evaluate_predictions(truth, predicted, model.config().n_classes);
}

std::string confusion_csv(const Evaluation& eval, std::span<const std::string> class_names, int precision) {
  const std::size_t n = eval.confusion.size();
  if (class_names.size() != n) throw DimensionError("class name count does not match the confusion matrix");
  std::string out;
  for (std::size_t j = 0; j < n; ++j) out += "," + class_names[j];
  out += '\n';
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    out += class_names[i];
    for (std::size_t j = 0; j < n; ++j) {
      out += ',';
      if (!eval.confusion[i].empty()) {
        std::snprintf(buf, sizeof buf, "%.*f", precision, eval.confusion[i][j]);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

std::string history_csv(std::span<const EpochMetrics> history) {
  std::string out = "epoch,train_acc,test_acc,avg_loss\n";
  char buf[160];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", m.epoch, m.train_acc, m.test_acc, m.avg_loss);
    out += buf;
  }
  return out;
}

}  // namespace falldet::har
