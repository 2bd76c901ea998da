#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "falldet/csi/window.hpp"
#include "falldet/ingest/dataset.hpp"

namespace falldet::ingest {

/// Synthetic dataset request. JSON form:
///   {"classes": {"Fall": 40, "Normal": 47, "No-person": 48},
///    "seed": 7, "sample_rate": 1000, "duration_s": 2.0}
/// Class order in the JSON object defines class ids.
struct SynthSpec {
  std::vector<std::pair<std::string, std::size_t>> classes;
  std::uint64_t seed = 0;
  double sample_rate = 1000.0;
  double duration_s = 2.0;
  std::size_t n_rx = 3;
  std::size_t n_tx = 1;
  std::size_t n_sub = 30;
  double sensor_noise = 0.05;  // std of additive amplitude noise
  double motion_gain = 1.0;    // scales the activity modulation, <1 models an obstructed path

  std::size_t samples_per_instance() const;
  void validate() const;
};

SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec read_synth_spec(const std::filesystem::path& file);

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<csi::AmplitudeWindow> windows;  // one raw window per manifest entry, same order
};

/// Deterministic in `spec` (including the seed).
///
/// Every instance rides on one static multipath baseline b[f] obtained by
/// sounding a random channel through apply_channel. Signal models:
///   no-person   b + sensor noise
///   normal/walk b + per-feature 1-2 Hz sinusoid with random phase
///   fall        b + one Gaussian-envelope burst (0.3-0.7 s wide) on a
///               random majority of the features
///   run, bed, sit-down, stand-up, pick-up have their own templates;
///   unknown names get a class-indexed sinusoid.
SynthDataset synth_dataset(const SynthSpec& spec);

/// Writes manifest.json and one CSV per instance under `dir`.
void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir);

}  // namespace falldet::ingest
