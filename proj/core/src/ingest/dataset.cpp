#include "falldet/ingest/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "falldet/error.hpp"

namespace falldet::ingest {

using csi::AmplitudeWindow;
using csi::RealMatrix;
using json = nlohmann::ordered_json;

std::string canonical_class_name(std::string_view name) {
  std::string s;
  for (char c : name) {
    if (c == ' ' || c == '\t') continue;
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::replace(s.begin(), s.end(), '_', '-');
  if (s == "walking") return "normal";
  if (s == "no-person/static" || s == "noperson" || s == "empty" || s == "static") return "no-person";
  return s;
}

std::optional<int> DatasetManifest::class_id(std::string_view name) const {
  const std::string key = canonical_class_name(name);
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (canonical_class_name(class_names[i]) == key) return static_cast<int>(i);
  }
  return std::nullopt;
}

void DatasetManifest::validate() const {
  if (class_names.empty()) throw ConfigError("manifest has no classes");
  if (n_features == 0) throw ConfigError("manifest n_features must be >= 1");
  if (!(sample_rate > 0.0)) throw ConfigError("manifest sample_rate must be positive");
  for (const auto& e : files) {
    if (e.class_id < 0 || static_cast<std::size_t>(e.class_id) >= class_names.size()) {
      throw ConfigError("class id " + std::to_string(e.class_id) + " out of range for " + e.path.string());
    }
  }
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open manifest", file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid manifest JSON: ") + e.what(), file.string());
  }
  DatasetManifest m;
  m.root = file.parent_path();
  try {
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.sample_rate = j.value("sample_rate", 1000.0);
    m.n_features = j.value("n_features", std::size_t{90});
    for (const auto& [path_str, cls] : j.at("files").items()) {
      ManifestEntry e;
      e.path = path_str;
      if (cls.is_number_integer()) {
        e.class_id = cls.get<int>();
      } else {
        const auto id = m.class_id(cls.get<std::string>());
        if (!id) throw ParseError("unknown class '" + cls.get<std::string>() + "' for " + path_str, file.string());
        e.class_id = *id;
      }
      m.files.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest schema error: ") + e.what(), file.string());
  }
  m.validate();
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& file) {
  json j;
  j["class_names"] = manifest.class_names;
  j["sample_rate"] = manifest.sample_rate;
  j["n_features"] = manifest.n_features;
  json files = json::object();
  for (const auto& e : manifest.files) files[e.path.generic_string()] = manifest.class_names.at(e.class_id);
  j["files"] = std::move(files);
  std::ofstream out(file);
  if (!out) throw ParseError("cannot write manifest", file.string());
  out << j.dump(2) << '\n';
}

RealMatrix read_csv_matrix(const std::filesystem::path& file, std::size_t n_features) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open CSV file", file.string());
  std::vector<double> values;
  std::vector<double> row;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    row.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t end = line.find(',', start);
      std::string_view cell(line.data() + start, (end == std::string::npos ? line.size() : end) - start);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError("non-numeric cell '" + std::string(cell) + "'", file.string(), line_no);
      }
      row.push_back(v);
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (rows == 0) {
      cols = row.size();
      if (cols != n_features && cols != n_features + 1) {
        throw ParseError("expected " + std::to_string(n_features) + " columns (or one more with a timestamp), got " +
                             std::to_string(cols),
                         file.string(), line_no);
      }
    } else if (row.size() != cols) {
      throw ParseError("ragged row: " + std::to_string(row.size()) + " columns, expected " + std::to_string(cols),
                       file.string(), line_no);
    }
    const std::size_t skip = cols - n_features;
    values.insert(values.end(), row.begin() + static_cast<std::ptrdiff_t>(skip), row.end());
    ++rows;
  }
  RealMatrix m;
  m.rows = rows;
  m.cols = n_features;
  m.data = std::move(values);
  return m;
}

void write_csv_matrix(const std::filesystem::path& file, const RealMatrix& m) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ParseError("cannot write CSV file", file.string());
  std::string line;
  char buf[32];
  for (std::size_t r = 0; r < m.rows; ++r) {
    line.clear();
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) line.push_back(',');
      const auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
      line.append(buf, res.ptr);
    }
    line.push_back('\n');
    out << line;
  }
}

std::vector<AmplitudeWindow> load_csv_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  std::vector<AmplitudeWindow> out;
  out.reserve(manifest.files.size());
  for (const auto& e : manifest.files) {
    AmplitudeWindow w;
    w.data = read_csv_matrix(manifest.root / e.path, manifest.n_features);
    w.sample_rate = manifest.sample_rate;
    w.label = e.class_id;
    w.source_id = e.path.generic_string();
    out.push_back(std::move(w));
  }
  return out;
}

void WindowingConfig::validate() const {
  if (window_len < 1) throw ConfigError("window_len must be >= 1");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (downsample < 1) throw ConfigError("downsample factor must be >= 1");
  if (window_len % downsample != 0) {
    throw ConfigError("window_len " + std::to_string(window_len) + " not divisible by downsample factor " +
                      std::to_string(downsample));
  }
}

std::vector<AmplitudeWindow> window(const AmplitudeWindow& raw, const WindowingConfig& cfg) {
  cfg.validate();
  const std::size_t n = window_count(raw.time_len(), cfg);
  const std::size_t out_len = cfg.output_len();
  const std::size_t f = raw.features();
  const double inv = 1.0 / static_cast<double>(cfg.downsample);
  std::vector<AmplitudeWindow> out;
  out.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t offset = w * cfg.stride;
    AmplitudeWindow win;
    win.data = RealMatrix(out_len, f);
    win.sample_rate = raw.sample_rate / static_cast<double>(cfg.downsample);
    win.label = raw.label;
    win.source_id = n == 1 ? raw.source_id : raw.source_id + "@" + std::to_string(offset);
    for (std::size_t t = 0; t < out_len; ++t) {
      for (std::size_t k = 0; k < cfg.downsample; ++k) {
        const std::size_t src = offset + t * cfg.downsample + k;
        for (std::size_t c = 0; c < f; ++c) win.data(t, c) += raw.data(src, c);
      }
      for (std::size_t c = 0; c < f; ++c) win.data(t, c) *= inv;
    }
    out.push_back(std::move(win));
  }
  return out;
}

std::vector<AmplitudeWindow> window(std::span<const csi::CsiFrame> frames, const WindowingConfig& cfg,
                                    double sample_rate, std::string source_id) {
  AmplitudeWindow raw;
  raw.sample_rate = sample_rate;
  raw.source_id = std::move(source_id);
  if (!frames.empty()) {
    const std::size_t f = frames.front().feature_count();
    raw.data = RealMatrix(frames.size(), f);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      if (frames[t].feature_count() != f) throw DimensionError("frames with differing antenna layouts in one stream");
      const auto amp = csi::amplitude(frames[t]);
      std::copy(amp.begin(), amp.end(), raw.data.data.begin() + static_cast<std::ptrdiff_t>(t * f));
    }
  }
  return window(raw, cfg);
}

std::vector<AmplitudeWindow> window_all(std::span<const AmplitudeWindow> raws, const WindowingConfig& cfg) {
  std::vector<AmplitudeWindow> out;
  for (const auto& r : raws) {
    auto ws = window(r, cfg);
    std::move(ws.begin(), ws.end(), std::back_inserter(out));
  }
  return out;
}

NormStats fit_normalizer(std::span<const AmplitudeWindow> train) {
  if (train.empty()) throw ConfigError("cannot fit normaliser on an empty training set");
  const std::size_t f = train.front().features();
  std::size_t n = 0;
  NormStats s;
  s.mean.assign(f, 0.0);
  s.std.assign(f, 0.0);
  for (const auto& w : train) {
    if (w.features() != f) throw DimensionError("training windows disagree on feature count");
    for (std::size_t t = 0; t < w.time_len(); ++t) {
      for (std::size_t c = 0; c < f; ++c) s.mean[c] += w.data(t, c);
    }
    n += w.time_len();
  }
  if (n < 2) throw ConfigError("normaliser needs at least two samples per feature");
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (const auto& w : train) {
    for (std::size_t t = 0; t < w.time_len(); ++t) {
      for (std::size_t c = 0; c < f; ++c) {
        const double d = w.data(t, c) - s.mean[c];
        s.std[c] += d * d;
      }
    }
  }
  for (auto& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(n)), NormStats::kStdFloor);
  return s;
}

AmplitudeWindow apply_normalizer(const NormStats& stats, const AmplitudeWindow& w) {
  if (stats.mean.size() != w.features()) throw DimensionError("normaliser feature count mismatch");
  AmplitudeWindow out = w;
  for (std::size_t t = 0; t < w.time_len(); ++t) {
    for (std::size_t c = 0; c < w.features(); ++c) out.data(t, c) = (w.data(t, c) - stats.mean[c]) / stats.std[c];
  }
  return out;
}

AmplitudeWindow invert_normalizer(const NormStats& stats, const AmplitudeWindow& w) {
  if (stats.mean.size() != w.features()) throw DimensionError("normaliser feature count mismatch");
  AmplitudeWindow out = w;
  for (std::size_t t = 0; t < w.time_len(); ++t) {
    for (std::size_t c = 0; c < w.features(); ++c) out.data(t, c) = w.data(t, c) * stats.std[c] + stats.mean[c];
  }
  return out;
}

std::vector<AmplitudeWindow> apply_normalizer(const NormStats& stats, std::span<const AmplitudeWindow> ws) {
  std::vector<AmplitudeWindow> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(apply_normalizer(stats, w));
  return out;
}

}  // namespace falldet::ingest
