#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "falldet/csi/window.hpp"
#include "falldet/har/checkpoint.hpp"
#include "falldet/har/model.hpp"
#include "falldet/ingest/dataset.hpp"
#include "falldet/nn/optim.hpp"

namespace falldet::har {

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t rng_seed = 0;
  bool stratified = true;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified: per class, floor(train_fraction * count) windows go to
/// train. Every class id in [0, n_classes) must be present.
Split split(std::span<const csi::AmplitudeWindow> windows, const SplitSpec& spec, std::size_t n_classes);

/// Windowed, split and normalised data ready for training.
struct PreparedData {
  std::vector<csi::AmplitudeWindow> train;
  std::vector<csi::AmplitudeWindow> test;
  ingest::NormStats stats;
};

/// Windows each raw instance, splits by instance, fits the normaliser on
/// the training part only and applies it to both parts.
PreparedData prepare(std::span<const csi::AmplitudeWindow> raw, const ingest::WindowingConfig& windowing,
                     const SplitSpec& split_spec, std::size_t n_classes);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  nn::AdamConfig adam{};
  std::uint64_t rng_seed = 0;  // shuffling and dropout
  bool keep_all_checkpoints = true;
  std::function<void(const EpochMetrics&)> on_epoch;
  std::function<bool(const EpochMetrics&)> stop_when;  // checked after each epoch
};

struct TrainResult {
  std::vector<EpochMetrics> history;        // index 0 is the initialisation
  std::vector<ModelCheckpoint> checkpoints; // per epoch when keep_all_checkpoints, else best only
  std::size_t best_epoch = 0;               // highest test accuracy, earliest on ties

  const ModelCheckpoint& best() const;
  /// First epoch whose test accuracy reaches `threshold`, or nullopt.
  std::optional<std::size_t> first_epoch_reaching(double threshold) const;
};

/// Mean loss and accuracy in evaluation mode.
std::pair<double, double> loss_and_accuracy(const HarModel& model, std::span<const csi::AmplitudeWindow> windows);

/// Adam on mean cross-entropy with shuffled mini-batches. Throws
/// NumericalError on a non-finite loss, naming the epoch and batch.
TrainResult train(HarModel& model, std::span<const csi::AmplitudeWindow> train_set,
                  std::span<const csi::AmplitudeWindow> test_set, const TrainConfig& cfg);

/// New model whose every non-head parameter is copied bit-exactly from
/// `pretrained` and whose head is re-initialised for `n_new_classes`.
/// With freeze_body the copied parameters are marked non-trainable.
HarModel transfer(const ModelCheckpoint& pretrained, std::size_t n_new_classes, std::uint64_t head_seed,
                  bool freeze_body = false);

}  // namespace falldet::har
