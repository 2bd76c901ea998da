#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "falldet/csi/frame.hpp"
#include "falldet/csi/window.hpp"

namespace falldet::ingest {

/// Lower-cases and maps known aliases onto one spelling
/// ("Walking" -> "normal", "No-person/static" -> "no-person").
std::string canonical_class_name(std::string_view name);

struct ManifestEntry {
  std::filesystem::path path;  // relative to the manifest root
  int class_id = 0;
};

/// A labelled dataset on disk: manifest.json plus one CSV per instance.
///
/// manifest.json:
///   {"class_names": [...], "sample_rate": 1000, "n_features": 90,
///    "files": {"fall_000.csv": "fall", ...}}
/// File classes may be given by name or by integer id.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> files;
  double sample_rate = 1000.0;
  std::size_t n_features = 90;

  std::size_t n_classes() const noexcept { return class_names.size(); }
  /// Index of a class by (canonicalised) name, or nullopt.
  std::optional<int> class_id(std::string_view name) const;
  void validate() const;
};

/// Accepts either a directory containing manifest.json or the file itself.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& file);

/// Rows of comma-separated numbers. When a row has n_features+1 columns
/// the leading timestamp column is dropped. Throws ParseError with
/// file/line on non-numeric cells or ragged rows.
csi::RealMatrix read_csv_matrix(const std::filesystem::path& file, std::size_t n_features);
void write_csv_matrix(const std::filesystem::path& file, const csi::RealMatrix& m);

/// One raw (un-windowed) window per manifest file, labelled from the manifest.
std::vector<csi::AmplitudeWindow> load_csv_dataset(const DatasetManifest& manifest);

enum class Normalization { kNone, kZScorePerFeature };

struct WindowingConfig {
  std::size_t window_len = 2000;  // samples
  std::size_t stride = 2000;      // samples
  std::size_t downsample = 4;     // mean-pooling factor along time
  Normalization normalization = Normalization::kZScorePerFeature;

  std::size_t output_len() const noexcept { return window_len / downsample; }
  void validate() const;
};

/// Windows starting at 0, stride, 2*stride, ... each mean-pooled in time.
/// Inputs shorter than window_len yield no windows.
std::vector<csi::AmplitudeWindow> window(const csi::AmplitudeWindow& raw, const WindowingConfig& cfg);
std::vector<csi::AmplitudeWindow> window(std::span<const csi::CsiFrame> frames, const WindowingConfig& cfg,
                                         double sample_rate, std::string source_id = {});
std::vector<csi::AmplitudeWindow> window_all(std::span<const csi::AmplitudeWindow> raws, const WindowingConfig& cfg);

/// Number of windows produced from an input of `length` samples.
constexpr std::size_t window_count(std::size_t length, const WindowingConfig& cfg) noexcept {
  return length < cfg.window_len ? 0 : (length - cfg.window_len) / cfg.stride + 1;
}

/// Per-feature z-score statistics (population variance).
struct NormStats {
  static constexpr double kStdFloor = 1e-8;
  std::vector<double> mean;
  std::vector<double> std;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Pools every time step of every window; needs at least two rows in total.
NormStats fit_normalizer(std::span<const csi::AmplitudeWindow> train);
csi::AmplitudeWindow apply_normalizer(const NormStats& stats, const csi::AmplitudeWindow& w);
csi::AmplitudeWindow invert_normalizer(const NormStats& stats, const csi::AmplitudeWindow& w);
std::vector<csi::AmplitudeWindow> apply_normalizer(const NormStats& stats, std::span<const csi::AmplitudeWindow> ws);

}  // namespace falldet::ingest
