#include "falldet/ingest/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <sstream>

#include "falldet/csi/channel.hpp"
#include "falldet/error.hpp"
#include "falldet/rng.hpp"

namespace falldet::ingest {
namespace {

using csi::AmplitudeWindow;
using csi::RealMatrix;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over the combined key
  std::uint64_t z = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Static per-feature amplitude obtained by sounding each antenna pair of a
// random multipath channel with a unit pilot through the channel model.
std::vector<double> sounded_baseline(const SynthSpec& spec, Rng& rng) {
  const csi::CsiFrame h = csi::multipath_frame(spec.n_rx, spec.n_tx, spec.n_sub, 6, rng);
  csi::SynthChannelConfig cfg;
  cfg.n_rx = spec.n_rx;
  cfg.n_tx = spec.n_tx;
  cfg.n_sub = spec.n_sub;
  cfg.frame_len = 16;
  cfg.noise_std = 0.01;
  std::vector<double> b(h.feature_count());
  for (std::size_t tx = 0; tx < spec.n_tx; ++tx) {
    csi::ComplexMatrix pilot(spec.n_tx, cfg.frame_len);
    for (std::size_t t = 0; t < cfg.frame_len; ++t) pilot(tx, t) = 1.0;
    for (std::size_t s = 0; s < spec.n_sub; ++s) {
      cfg.rng_seed = rng.next_u64();
      const auto y = csi::apply_channel(h, cfg, pilot, s);
      for (std::size_t rx = 0; rx < spec.n_rx; ++rx) {
        std::complex<double> mean{};
        for (std::size_t t = 0; t < cfg.frame_len; ++t) mean += y(rx, t);
        mean /= static_cast<double>(cfg.frame_len);
        b[csi::flat_index({rx, tx, s}, spec.n_tx, spec.n_sub)] = std::abs(mean);
      }
    }
  }
  return b;
}

std::vector<std::size_t> random_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double gaussian(double t, double centre, double sigma) {
  const double z = (t - centre) / sigma;
  return std::exp(-0.5 * z * z);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Adds the class-specific modulation m[t][f] to `x`.
void add_activity(const std::string& cls, std::size_t class_index, RealMatrix& x, double rate, Rng& rng) {
  const std::size_t n_t = x.rows;
  const std::size_t n_f = x.cols;
  const double duration = static_cast<double>(n_t) / rate;
  auto time = [rate](std::size_t t) { return static_cast<double>(t) / rate; };

  // Periodic motion occupies part of the recording; the subject is idle
  // before and after, with soft on/off ramps.
  auto sinusoid = [&](double f_lo, double f_hi, double a_lo, double a_hi) {
    const double f0 = rng.uniform(f_lo, f_hi);
    const double a = rng.uniform(a_lo, a_hi);
    const double len = rng.uniform(0.6, 0.9) * duration;
    const double on = rng.uniform(0.0, duration - len);
    const double off = on + len;
    std::vector<double> env(n_t);
    for (std::size_t t = 0; t < n_t; ++t) env[t] = sigmoid((time(t) - on) / 0.1) * sigmoid((off - time(t)) / 0.1);
    for (std::size_t f = 0; f < n_f; ++f) {
      const double phase = rng.uniform(0.0, kTwoPi);
      const double amp = a * rng.uniform(0.5, 1.0);
      for (std::size_t t = 0; t < n_t; ++t) x(t, f) += amp * env[t] * std::sin(kTwoPi * f0 * time(t) + phase);
    }
  };
  auto bump = [&](const std::vector<std::size_t>& feats, double centre, double sigma, double a) {
    for (std::size_t f : feats) {
      const double amp = a * rng.uniform(0.7, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      for (std::size_t t = 0; t < n_t; ++t) x(t, f) += amp * gaussian(time(t), centre, sigma);
    }
  };
  auto step = [&](double sign) {
    const double t0 = rng.uniform(0.3, 0.7) * duration;
    const double level = sign * rng.uniform(0.3, 0.6);
    for (std::size_t f = 0; f < n_f; ++f) {
      const double amp = level * rng.uniform(0.6, 1.0);
      for (std::size_t t = 0; t < n_t; ++t) x(t, f) += amp * sigmoid((time(t) - t0) / 0.08);
    }
  };

  if (cls == "no-person") return;
  if (cls == "normal" || cls == "walk") {
    sinusoid(1.0, 2.0, 0.15, 0.3);
  } else if (cls == "fall") {
    const double centre = rng.uniform(0.3, 0.7) * duration;
    const double width = rng.uniform(0.3, 0.7);
    const std::size_t k = n_f / 2 + 1 + rng.below(n_f - n_f / 2);
    bump(random_subset(n_f, k, rng), centre, width / 2.0, rng.uniform(0.8, 1.5));
  } else if (cls == "run") {
    sinusoid(2.5, 3.5, 0.3, 0.5);
  } else if (cls == "bed") {
    const double centre = rng.uniform(0.35, 0.65) * duration;
    const std::size_t k = n_f / 4 + rng.below(n_f / 4 + 1);
    bump(random_subset(n_f, std::max<std::size_t>(k, 1), rng), centre, rng.uniform(0.5, 0.8), rng.uniform(0.3, 0.5));
  } else if (cls == "sit-down") {
    step(-1.0);
  } else if (cls == "stand-up") {
    step(+1.0);
  } else if (cls == "pick-up") {
    const double centre = rng.uniform(0.25, 0.45) * duration;
    const double gap = rng.uniform(0.6, 1.0);
    const auto feats = random_subset(n_f, std::max<std::size_t>(n_f / 2, 1), rng);
    const double a = rng.uniform(0.4, 0.7);
    for (std::size_t f : feats) {
      const double amp = a * rng.uniform(0.7, 1.0);
      for (std::size_t t = 0; t < n_t; ++t) {
        x(t, f) += amp * (gaussian(time(t), centre + gap, 0.15) - gaussian(time(t), centre, 0.15));
      }
    }
  } else {
    const double f0 = 0.5 + 0.5 * static_cast<double>(class_index);
    sinusoid(f0, f0, 0.25, 0.25);
  }
}

}  // namespace

std::size_t SynthSpec::samples_per_instance() const {
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
}

void SynthSpec::validate() const {
  if (classes.empty()) throw ConfigError("synthetic spec has no classes");
  for (const auto& [name, count] : classes) {
    if (count < 1) throw ConfigError("class '" + name + "' needs at least one instance");
  }
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  if (samples_per_instance() < 1) throw ConfigError("duration_s * sample_rate must give at least one sample");
  if (n_rx < 1 || n_rx > 3 || n_tx < 1 || n_tx > 3 || n_sub < 1) throw ConfigError("invalid antenna layout");
  if (!(sensor_noise >= 0.0)) throw ConfigError("sensor_noise must be >= 0");
  if (!(motion_gain >= 0.0)) throw ConfigError("motion_gain must be >= 0");
}

SynthSpec parse_synth_spec(const std::string& json_text) {
  using json = nlohmann::ordered_json;
  SynthSpec spec;
  try {
    const json j = json::parse(json_text);
    for (const auto& [name, count] : j.at("classes").items()) {
      spec.classes.emplace_back(name, count.get<std::size_t>());
    }
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.sample_rate = j.value("sample_rate", 1000.0);
    spec.duration_s = j.value("duration_s", 2.0);
    spec.n_rx = j.value("n_rx", std::size_t{3});
    spec.n_tx = j.value("n_tx", std::size_t{1});
    spec.n_sub = j.value("n_sub", std::size_t{30});
    spec.sensor_noise = j.value("sensor_noise", 0.05);
    spec.motion_gain = j.value("motion_gain", 1.0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SynthSpec read_synth_spec(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open synthetic spec", file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_synth_spec(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.what(), file.string());
  }
}

SynthDataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  Rng env_rng(mix_seed(spec.seed, 0xba5e, 0));
  const std::vector<double> baseline = sounded_baseline(spec, env_rng);
  const std::size_t n_f = baseline.size();
  const std::size_t n_t = spec.samples_per_instance();

  SynthDataset ds;
  ds.manifest.sample_rate = spec.sample_rate;
  ds.manifest.n_features = n_f;
  for (const auto& [name, count] : spec.classes) ds.manifest.class_names.push_back(name);

  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& [name, count] = spec.classes[c];
    const std::string canon = canonical_class_name(name);
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng(mix_seed(spec.seed, c + 1, i));
      const double gain = rng.uniform(0.95, 1.05);
      RealMatrix x(n_t, n_f);
      add_activity(canon, c, x, spec.sample_rate, rng);
      for (std::size_t t = 0; t < n_t; ++t) {
        for (std::size_t f = 0; f < n_f; ++f) x(t, f) = gain * baseline[f] + spec.motion_gain * x(t, f);
      }
      for (auto& v : x.data) v = std::max(0.0, v + rng.normal(0.0, spec.sensor_noise));

      char file[96];
      std::snprintf(file, sizeof file, "%s_%03zu.csv", canon.c_str(), i);
      ds.manifest.files.push_back({file, static_cast<int>(c)});

      AmplitudeWindow w;
      w.data = std::move(x);
      w.sample_rate = spec.sample_rate;
      w.label = static_cast<int>(c);
      w.source_id = file;
      ds.windows.push_back(std::move(w));
    }
  }
  return ds;
}

void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < dataset.windows.size(); ++i) {
    write_csv_matrix(dir / dataset.manifest.files[i].path, dataset.windows[i].data);
  }
  write_manifest(dataset.manifest, dir / "manifest.json");
}

}  // namespace falldet::ingest
