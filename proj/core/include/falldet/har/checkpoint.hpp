#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "falldet/har/model.hpp"
#include "falldet/ingest/dataset.hpp"
#include "falldet/nn/tensor.hpp"

namespace falldet::har {

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double avg_loss = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

/// Architecture, weights and training metadata.
///
/// On disk: the 7 bytes "FDCKPT1", a u64 little-endian length, that many
/// bytes of JSON metadata (config, epoch, metrics, class names, optional
/// normaliser and windowing, parameter index), then each parameter's
/// tensor payload in index order.
struct ModelCheckpoint {
  static constexpr int kVersion = 1;

  int version = kVersion;
  ModelConfig config;
  std::vector<std::pair<std::string, nn::Tensor>> parameters;
  std::size_t epoch = 0;
  std::vector<EpochMetrics> metrics;
  std::vector<std::string> class_names;
  std::optional<ingest::NormStats> normalizer;
  std::optional<ingest::WindowingConfig> windowing;

  const nn::Tensor* find(std::string_view name) const;
};

/// Copies the model's current parameters.
ModelCheckpoint snapshot(const HarModel& model, std::size_t epoch = 0, std::vector<EpochMetrics> metrics = {});

/// Rebuilds a model; throws ConfigError when the version is unknown or the
/// stored parameters do not match the config's names and shapes.
HarModel restore(const ModelCheckpoint& ckpt);

/// Overwrites the model's parameter values from the checkpoint (names and shapes must match).
void load_weights(HarModel& model, const ModelCheckpoint& ckpt);

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& file);
ModelCheckpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace falldet::har
