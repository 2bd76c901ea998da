#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "falldet/error.hpp"
#include "falldet/har/training.hpp"
#include "falldet/ingest/dataset.hpp"
#include "falldet/ingest/synth.hpp"
#include "falldet/rng.hpp"

using namespace falldet;
using namespace falldet::ingest;
using csi::AmplitudeWindow;
using csi::RealMatrix;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("falldet_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

AmplitudeWindow ramp(std::size_t t, std::size_t f, int label = 0) {
  AmplitudeWindow w;
  w.data = RealMatrix(t, f);
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < f; ++c) w.data(r, c) = double(r * 100 + c);
  }
  w.label = label;
  w.sample_rate = 100;
  return w;
}

// Labelled windows with the given per-class counts.
std::vector<AmplitudeWindow> labelled(const std::vector<std::size_t>& counts) {
  std::vector<AmplitudeWindow> out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      auto w = ramp(2, 1, int(c));
      w.source_id = std::to_string(c) + "_" + std::to_string(i);
      out.push_back(w);
    }
  }
  return out;
}

}  // namespace

TEST(ClassNames, Canonical) {
  EXPECT_EQ(canonical_class_name("Walking"), "normal");
  EXPECT_EQ(canonical_class_name("No-person/static"), "no-person");
  EXPECT_EQ(canonical_class_name("Sit_down"), "sit-down");
  EXPECT_EQ(canonical_class_name("Fall"), "fall");
}

TEST(Windowing, OffsetsFollowStride) {
  WindowingConfig cfg{4, 3, 1, Normalization::kNone};
  const auto ws = window(ramp(10, 2), cfg);
  ASSERT_EQ(ws.size(), 3u);
  EXPECT_EQ(window_count(10, cfg), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ws[i].data(0, 0), double(i * 3 * 100));
}

TEST(Windowing, DownsampleAverages) {
  WindowingConfig cfg{4, 4, 2, Normalization::kNone};
  const auto ws = window(ramp(4, 3), cfg);
  ASSERT_EQ(ws.size(), 1u);
  ASSERT_EQ(ws[0].time_len(), 2u);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(ws[0].data(0, c), (0 + 100) / 2.0 + c);
    EXPECT_DOUBLE_EQ(ws[0].data(1, c), (200 + 300) / 2.0 + c);
  }
  EXPECT_DOUBLE_EQ(ws[0].sample_rate, 50.0);
}

TEST(Windowing, ExactAndShortInputs) {
  WindowingConfig cfg{5, 5, 1, Normalization::kNone};
  EXPECT_EQ(window(ramp(5, 1), cfg).size(), 1u);
  EXPECT_TRUE(window(ramp(4, 1), cfg).empty());
}

TEST(Windowing, RejectsIndivisibleDownsample) {
  WindowingConfig cfg{5, 5, 2, Normalization::kNone};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Windowing, FromFramesUsesAmplitude) {
  std::vector<csi::CsiFrame> frames(4, csi::CsiFrame::zeros(1, 1, 2));
  for (std::size_t t = 0; t < 4; ++t) frames[t].csi = {{3.0 * t, 4.0 * t}, {0, 1}};
  const auto ws = window(frames, {4, 4, 1, Normalization::kNone}, 10.0, "s");
  ASSERT_EQ(ws.size(), 1u);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_DOUBLE_EQ(ws[0].data(t, 0), 5.0 * t);
    EXPECT_DOUBLE_EQ(ws[0].data(t, 1), 1.0);
  }
}

TEST(Normalizer, ConstantColumnIsFloored) {
  AmplitudeWindow w = ramp(6, 2);
  for (std::size_t r = 0; r < 6; ++r) w.data(r, 1) = 7.0;
  const std::vector<AmplitudeWindow> train{w};
  const auto s = fit_normalizer(train);
  EXPECT_EQ(s.std[1], NormStats::kStdFloor);
  const auto n = apply_normalizer(s, w);
  for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(n.data(r, 1), 0.0);
}

TEST(Normalizer, MatchesTwoPassOracle) {
  Rng rng(4);
  std::vector<AmplitudeWindow> train;
  for (int i = 0; i < 5; ++i) {
    AmplitudeWindow w;
    w.data = RealMatrix(7, 3);
    for (auto& v : w.data.data) v = rng.normal(2.0, 3.0);
    train.push_back(w);
  }
  const auto s = fit_normalizer(train);
  for (std::size_t c = 0; c < 3; ++c) {
    double sum = 0.0, n = 0.0;
    for (const auto& w : train) {
      for (std::size_t r = 0; r < w.time_len(); ++r, n += 1) sum += w.data(r, c);
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& w : train) {
      for (std::size_t r = 0; r < w.time_len(); ++r) ss += (w.data(r, c) - mean) * (w.data(r, c) - mean);
    }
    EXPECT_NEAR(s.mean[c], mean, 1e-12);
    EXPECT_NEAR(s.std[c], std::sqrt(ss / n), 1e-12);
  }
}

TEST(Normalizer, StandardisedDataRecoversUnitStats) {
  Rng rng(5);
  AmplitudeWindow w;
  w.data = RealMatrix(50, 4);
  for (auto& v : w.data.data) v = rng.uniform(-10, 30);
  const std::vector<AmplitudeWindow> one{w};
  const auto z = apply_normalizer(fit_normalizer(one), w);
  const std::vector<AmplitudeWindow> zs{z};
  const auto again = fit_normalizer(zs);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(again.mean[c], 0.0, 1e-9);
    EXPECT_NEAR(again.std[c], 1.0, 1e-9);
  }
  const auto back = invert_normalizer(fit_normalizer(one), z);
  for (std::size_t i = 0; i < w.data.data.size(); ++i) EXPECT_NEAR(back.data.data[i], w.data.data[i], 1e-9);
}

TEST(Normalizer, NeedsTwoRows) {
  const std::vector<AmplitudeWindow> tiny{ramp(1, 2)};
  EXPECT_THROW(fit_normalizer(tiny), ConfigError);
}

TEST(Csv, RoundTripAndTimestampColumn) {
  const auto dir = scratch("csv");
  RealMatrix m(3, 2);
  m.data = {0.1, -2.5, 1e-17, 3.0, 12345.678, 0.0};
  write_csv_matrix(dir / "m.csv", m);
  EXPECT_EQ(read_csv_matrix(dir / "m.csv", 2), m);
  std::ofstream(dir / "ts.csv") << "0.0,1,2\n0.1,3,4\n";
  const auto t = read_csv_matrix(dir / "ts.csv", 2);
  EXPECT_EQ(t.data, (std::vector<double>{1, 2, 3, 4}));
  fs::remove_all(dir);
}

TEST(Csv, ErrorsNameFileAndLine) {
  const auto dir = scratch("csv_err");
  std::ofstream(dir / "bad.csv") << "1,2\n3,x\n";
  std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
  try {
    read_csv_matrix(dir / "bad.csv", 2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_csv_matrix(dir / "ragged.csv", 2), ParseError);
  EXPECT_THROW(read_csv_matrix(dir / "missing.csv", 2), ParseError);
  fs::remove_all(dir);
}

TEST(Manifest, LoadsLabelledWindows) {
  const auto dir = scratch("manifest");
  std::ofstream(dir / "manifest.json")
      << R"({"class_names": ["Fall", "Walking"], "sample_rate": 10, "n_features": 2,
            "files": {"a.csv": "fall", "b.csv": 1, "c.csv": "normal"}})";
  std::ofstream(dir / "a.csv") << "0,0\n0,0\n";
  std::ofstream(dir / "b.csv") << "1,2\n";
  std::ofstream(dir / "c.csv") << "5,6\n";
  const auto m = read_manifest(dir);
  ASSERT_EQ(m.files.size(), 3u);
  const auto ws = load_csv_dataset(m);
  std::map<int, int> per;
  for (const auto& w : ws) ++per[*w.label];
  EXPECT_EQ(per[0], 1);
  EXPECT_EQ(per[1], 2);
  // Single file of zeros gives one all-zero window.
  for (const auto& w : ws) {
    if (w.source_id == "a.csv") {
      for (double v : w.data.data) EXPECT_EQ(v, 0.0);
    }
  }
  fs::remove_all(dir);
}

TEST(Manifest, UnknownClassIsParseError) {
  const auto dir = scratch("manifest_bad");
  std::ofstream(dir / "manifest.json") << R"({"class_names": ["Fall"], "files": {"a.csv": "jump"}})";
  EXPECT_THROW(read_manifest(dir), ParseError);
  std::ofstream(dir / "manifest.json") << "{not json";
  EXPECT_THROW(read_manifest(dir), ParseError);
  fs::remove_all(dir);
}

TEST(Split, TableTwoCounts) {
  const auto ws = labelled({40, 47, 48});
  const auto s = har::split(ws, {0.8, 1, true}, 3);
  EXPECT_EQ(s.train.size(), 32u + 37u + 38u);
  EXPECT_EQ(s.test.size(), 28u);
}

TEST(Split, TableOneCountsFollowFloorRule) {
  const std::vector<std::size_t> counts{79, 79, 80, 80, 80, 79, 80};
  std::size_t want = 0;
  for (auto c : counts) want += static_cast<std::size_t>(std::floor(0.8 * double(c)));
  const auto ws = labelled(counts);
  const auto s = har::split(ws, {0.8, 1, true}, counts.size());
  EXPECT_EQ(s.train.size(), want);
  EXPECT_EQ(s.train.size() + s.test.size(), 557u);
}

TEST(Split, DeterministicAndDisjoint) {
  const auto ws = labelled({10, 12});
  const auto a = har::split(ws, {0.8, 9, true}, 2);
  const auto b = har::split(ws, {0.8, 9, true}, 2);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::vector<int> seen(ws.size(), 0);
  for (auto i : a.train) ++seen[i];
  for (auto i : a.test) ++seen[i];
  for (int v : seen) EXPECT_EQ(v, 1);
}

TEST(Split, MissingClassThrows) {
  const auto ws = labelled({3, 0, 3});
  EXPECT_THROW(har::split(ws, {0.8, 1, true}, 3), ConfigError);
}

namespace {

SynthSpec fall3_spec(std::uint64_t seed) {
  SynthSpec s;
  s.classes = {{"Fall", 40}, {"Normal", 47}, {"No-person", 48}};
  s.seed = seed;
  s.sample_rate = 50;
  s.duration_s = 4;
  return s;
}

double temporal_variance(const AmplitudeWindow& w) {
  double total = 0.0;
  for (std::size_t c = 0; c < w.features(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < w.time_len(); ++r) mean += w.data(r, c);
    mean /= double(w.time_len());
    double ss = 0.0;
    for (std::size_t r = 0; r < w.time_len(); ++r) ss += (w.data(r, c) - mean) * (w.data(r, c) - mean);
    total += ss / double(w.time_len());
  }
  return total / double(w.features());
}

}  // namespace

TEST(Synth, ClassCountsExact) {
  const auto ds = synth_dataset(fall3_spec(7));
  ASSERT_EQ(ds.windows.size(), 135u);
  std::map<int, std::size_t> per;
  for (const auto& w : ds.windows) ++per[*w.label];
  EXPECT_EQ(per[0], 40u);
  EXPECT_EQ(per[1], 47u);
  EXPECT_EQ(per[2], 48u);
  EXPECT_EQ(ds.windows[0].time_len(), 200u);
  EXPECT_EQ(ds.windows[0].features(), 90u);
}

TEST(Synth, Deterministic) {
  const auto a = synth_dataset(fall3_spec(7));
  const auto b = synth_dataset(fall3_spec(7));
  EXPECT_EQ(a.windows, b.windows);
  EXPECT_NE(synth_dataset(fall3_spec(8)).windows, a.windows);
}

TEST(Synth, NoPersonIsQuieterThanEveryFall) {
  const auto ds = synth_dataset(fall3_spec(7));
  double loudest_empty = 0.0, quietest_fall = INFINITY;
  for (const auto& w : ds.windows) {
    const double v = temporal_variance(w);
    if (*w.label == 2) loudest_empty = std::max(loudest_empty, v);
    if (*w.label == 0) quietest_fall = std::min(quietest_fall, v);
  }
  EXPECT_LT(loudest_empty, quietest_fall);
}

TEST(Synth, WrittenDatasetLoadsBack) {
  const auto dir = scratch("synth");
  SynthSpec s = fall3_spec(3);
  s.classes = {{"Fall", 2}, {"No-person", 3}};
  const auto ds = synth_dataset(s);
  write_dataset(ds, dir);
  const auto m = read_manifest(dir);
  EXPECT_EQ(m.class_names, (std::vector<std::string>{"Fall", "No-person"}));
  const auto back = load_csv_dataset(m);
  ASSERT_EQ(back.size(), ds.windows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].label, ds.windows[i].label);
    EXPECT_EQ(back[i].data, ds.windows[i].data);  // shortest round-trip formatting
  }
  fs::remove_all(dir);
}

TEST(Synth, SpecParsingAndValidation) {
  const auto s = parse_synth_spec(R"({"classes": {"Fall": 4, "Walk": 5}, "seed": 3, "sample_rate": 100,
                                      "duration_s": 1.5, "motion_gain": 0.5})");
  ASSERT_EQ(s.classes.size(), 2u);
  EXPECT_EQ(s.classes[1].first, "Walk");
  EXPECT_EQ(s.samples_per_instance(), 150u);
  EXPECT_EQ(s.motion_gain, 0.5);
  EXPECT_THROW(parse_synth_spec(R"({"classes": {}})"), ConfigError);
  EXPECT_THROW(parse_synth_spec("[1,2]"), ParseError);
}
