#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falldet/csi/window.hpp"
#include "falldet/har/checkpoint.hpp"
#include "falldet/har/model.hpp"

namespace falldet::har {

struct Evaluation {
  double accuracy = 0.0;
  /// confusion[i][j]: fraction of true-class-i samples predicted as j.
  /// Rows of classes absent from the test set are empty.
  std::vector<std::vector<double>> confusion;
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> class_counts;
  std::size_t total = 0;
};

Evaluation evaluate_predictions(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes);

/// Test windows must carry labels.
Evaluation evaluate(const HarModel& model, std::span<const csi::AmplitudeWindow> test_set);

/// Header row and first column carry the class names.
std::string confusion_csv(const Evaluation& eval, std::span<const std::string> class_names, int precision = 2);

/// epoch,train_acc,test_acc,avg_loss
std::string history_csv(std::span<const EpochMetrics> history);

}  // namespace falldet::har
