#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "falldet/error.hpp"
#include "falldet/har/checkpoint.hpp"
#include "falldet/har/evaluation.hpp"
#include "falldet/har/policy.hpp"
#include "falldet/har/training.hpp"
#include "falldet/rng.hpp"

using namespace falldet;
using namespace falldet::har;
using csi::AmplitudeWindow;

namespace {

ModelConfig tiny(std::size_t classes = 3, std::uint64_t seed = 1) {
  ModelConfig c;
  c.input_time = 8;
  c.input_features = 6;
  c.n_classes = classes;
  c.embed_dim = 8;
  c.heads = 2;
  c.n_blocks = 1;
  c.conv_kernels = {3, 5};
  c.dropout = 0.0;
  c.rng_seed = seed;
  return c;
}

// Class c: a sinusoid at frequency c+1 in every feature, plus noise.
std::vector<AmplitudeWindow> toy_windows(std::size_t per_class, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AmplitudeWindow> out;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      AmplitudeWindow w;
      w.data = csi::RealMatrix(8, 6);
      for (std::size_t t = 0; t < 8; ++t) {
        for (std::size_t f = 0; f < 6; ++f) w.data(t, f) = std::sin(double((c + 1) * t) * 0.7) + 0.1 * rng.normal();
      }
      w.label = int(c);
      out.push_back(w);
    }
  }
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("falldet_" + name + "_" + std::to_string(::getpid()));
}

}  // namespace

TEST(Model, ReferenceConfigShapes) {
  ModelConfig c;
  c.input_time = 500;
  c.n_classes = 7;
  HarModel m(c);
  Rng rng(1);
  nn::Tensor x({2, 500, 90});
  for (auto& v : x.data()) v = rng.normal();
  const nn::Tensor y = m.logits(x);
  EXPECT_EQ(y.shape(), (nn::Shape{2, 7}));
}

TEST(Model, SameSeedSameInit) {
  HarModel a(tiny()), b(tiny());
  EXPECT_EQ(serialize_checkpoint(snapshot(a)), serialize_checkpoint(snapshot(b)));
  HarModel c(tiny(3, 2));
  EXPECT_NE(serialize_checkpoint(snapshot(a)), serialize_checkpoint(snapshot(c)));
}

TEST(Model, ConfigValidation) {
  ModelConfig c = tiny();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.conv_kernels = {4};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny(1);
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, WrongInputShapeThrows) {
  HarModel m(tiny());
  EXPECT_THROW(m.logits(nn::Tensor({1, 9, 6})), DimensionError);
}

TEST(Model, ProbabilitiesSumToOne) {
  HarModel m(tiny());
  const auto ws = toy_windows(2, 3, 1);
  for (const auto& p : m.predict_proba(ws)) {
    double s = 0.0;
    for (double v : p) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  HarModel m(tiny());
  ModelCheckpoint ck = snapshot(m, 4, {{0, 0.1, 0.2, 1.5}, {1, 0.3, 0.4, 1.2}});
  ck.class_names = {"Fall", "Normal", "No-person"};
  ck.normalizer = ingest::NormStats{{1, 2, 3, 4, 5, 6}, {1, 1, 2, 2, 3, 3}};
  ck.windowing = ingest::WindowingConfig{16, 16, 2, ingest::Normalization::kZScorePerFeature};
  const auto path = scratch("ckpt");
  save_checkpoint(ck, path);
  const ModelCheckpoint back = load_checkpoint(path);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));
  EXPECT_EQ(back.class_names, ck.class_names);
  EXPECT_EQ(back.metrics, ck.metrics);
  EXPECT_EQ(*back.normalizer, *ck.normalizer);
  EXPECT_EQ(back.windowing->downsample, 2u);
  std::filesystem::remove(path);

  const HarModel r = restore(back);
  const auto ws = toy_windows(1, 3, 2);
  EXPECT_EQ(r.predict_proba(ws), m.predict_proba(ws));
}

TEST(Checkpoint, CorruptBytesAreRejected) {
  auto bytes = serialize_checkpoint(snapshot(HarModel(tiny())));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), ParseError);
  bytes.resize(bytes.size() - 9);
  EXPECT_THROW(deserialize_checkpoint(bytes), ParseError);
}

TEST(Checkpoint, MismatchedParametersRejected) {
  ModelCheckpoint ck = snapshot(HarModel(tiny()));
  ck.parameters.pop_back();
  EXPECT_THROW(restore(ck), ConfigError);
}

TEST(Transfer, BodyIsBitIdenticalAndHeadIsNew) {
  HarModel pre(tiny(7));
  const ModelCheckpoint ck = snapshot(pre);
  const HarModel t = transfer(ck, 3, 99);
  std::size_t body = 0;
  for (const auto& p : t.parameters().items()) {
    if (HarModel::is_head(p.name)) continue;
    const nn::Tensor* src = ck.find(p.name);
    ASSERT_NE(src, nullptr) << p.name;
    ASSERT_EQ(p.var.value().shape(), src->shape());
    EXPECT_EQ(std::memcmp(p.var.value().data().data(), src->data().data(), src->size() * sizeof(double)), 0)
        << p.name;
    ++body;
  }
  EXPECT_EQ(body + 2, t.parameters().items().size());
  EXPECT_EQ(t.parameters().find("head.weight")->var.shape(), (nn::Shape{3, 2 * 8}));
  EXPECT_EQ(t.config().n_classes, 3u);
}

TEST(Transfer, FreezeMarksBodyNonTrainable) {
  const HarModel t = transfer(snapshot(HarModel(tiny(7))), 3, 1, true);
  for (const auto& p : t.parameters().items()) EXPECT_EQ(p.trainable, HarModel::is_head(p.name)) << p.name;
}

TEST(Training, ZeroEpochsReportsInitialisationOnly) {
  HarModel m(tiny());
  const auto ws = toy_windows(4, 3, 3);
  TrainConfig tc;
  tc.epochs = 0;
  const auto r = train(m, ws, ws, tc);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].epoch, 0u);
  EXPECT_EQ(r.best_epoch, 0u);
}

TEST(Training, OneBatchLowersTrainingLoss) {
  HarModel m(tiny());
  const auto ws = toy_windows(3, 3, 4);
  const double before = loss_and_accuracy(m, ws).first;
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = ws.size();
  train(m, ws, ws, tc);
  EXPECT_LT(loss_and_accuracy(m, ws).first, before);
}

TEST(Training, LearnsSeparableToyData) {
  HarModel m(tiny());
  const auto tr = toy_windows(12, 3, 5), te = toy_windows(4, 3, 6);
  TrainConfig tc;
  tc.epochs = 40;
  tc.batch_size = 8;
  tc.adam.lr = 3e-3;
  tc.stop_when = [](const EpochMetrics& e) { return e.test_acc >= 1.0; };
  const auto r = train(m, tr, te, tc);
  EXPECT_GE(r.history[r.best_epoch].test_acc, 0.95);
  ASSERT_TRUE(r.first_epoch_reaching(0.95).has_value());
  EXPECT_EQ(r.best().epoch, r.best_epoch);
}

TEST(Training, DeterministicGivenSeed) {
  const auto tr = toy_windows(4, 3, 7);
  TrainConfig tc;
  tc.epochs = 2;
  tc.rng_seed = 3;
  HarModel a(tiny()), b(tiny());
  const auto ra = train(a, tr, tr, tc), rb = train(b, tr, tr, tc);
  EXPECT_EQ(ra.history, rb.history);
  EXPECT_EQ(serialize_checkpoint(snapshot(a)), serialize_checkpoint(snapshot(b)));
}

TEST(Training, NonFiniteLossIsNumericalError) {
  HarModel m(tiny());
  auto ws = toy_windows(2, 3, 8);
  ws[0].data(0, 0) = NAN;
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_THROW(train(m, ws, ws, tc), NumericalError);
}

TEST(Evaluation, PerfectPredictorIsIdentity) {
  const std::vector<int> y{0, 1, 2, 2, 1, 0};
  const auto e = evaluate_predictions(y, y, 3);
  EXPECT_EQ(e.accuracy, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(e.confusion[i][j], i == j ? 1.0 : 0.0);
  }
}

TEST(Evaluation, MatchesCountOracle) {
  Rng rng(9);
  std::vector<int> truth, pred;
  for (int i = 0; i < 500; ++i) {
    truth.push_back(int(rng.below(4)));
    pred.push_back(rng.below(3) == 0 ? int(rng.below(4)) : truth.back());
  }
  const auto e = evaluate_predictions(truth, pred, 4);
  std::size_t hits = 0;
  std::vector<std::vector<double>> n(4, std::vector<double>(4, 0.0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    hits += truth[i] == pred[i];
    n[truth[i]][pred[i]] += 1.0;
  }
  EXPECT_EQ(e.accuracy, double(hits) / 500.0);
  for (std::size_t i = 0; i < 4; ++i) {
    double row = 0.0, total = 0.0;
    for (double v : n[i]) total += v;
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(e.confusion[i][j], n[i][j] / total, 1e-15);
      row += e.confusion[i][j];
    }
    EXPECT_NEAR(row, 1.0, 1e-9);
  }
}

TEST(Evaluation, AbsentClassRowIsEmpty) {
  const std::vector<int> truth{1}, pred{1};
  const auto e = evaluate_predictions(truth, pred, 3);
  EXPECT_TRUE(e.confusion[0].empty());
  EXPECT_EQ(e.confusion[1], (std::vector<double>{0, 1, 0}));
  const std::vector<std::string> names{"Fall", "Walking", "No-person"};
  EXPECT_EQ(confusion_csv(e, names), ",Fall,Walking,No-person\nFall,,,\nWalking,0.00,1.00,0.00\nNo-person,,,\n");
}

TEST(Evaluation, ConfusionCsvLayout) {
  const std::vector<int> truth{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 2};
  std::vector<int> pred = truth;
  pred[0] = 1;
  const std::vector<std::string> names{"Fall", "Walking", "No-person"};
  const std::string csv = confusion_csv(evaluate_predictions(truth, pred, 3), names);
  EXPECT_EQ(csv, ",Fall,Walking,No-person\n"
                 "Fall,0.90,0.10,0.00\n"
                 "Walking,0.00,1.00,0.00\n"
                 "No-person,0.00,0.00,1.00\n");
}

TEST(Evaluation, HistoryCsv) {
  const std::vector<EpochMetrics> h{{0, 0.5, 0.25, 1.0}, {1, 0.75, 0.5, 0.5}};
  EXPECT_EQ(history_csv(h), "epoch,train_acc,test_acc,avg_loss\n0,0.500000,0.250000,1.000000\n1,0.750000,0.500000,0.500000\n");
}

namespace {

std::vector<std::vector<double>> fall_probs(std::initializer_list<double> ps) {
  std::vector<std::vector<double>> out;
  for (double p : ps) out.push_back({p, 1.0 - p});
  return out;
}

std::vector<std::size_t> fall_windows(const std::vector<StreamRecord>& recs) {
  std::vector<std::size_t> out;
  for (const auto& r : recs) {
    if (r.kind == StreamRecord::Kind::kFall) out.push_back(r.window_index + 1);  // 1-based
  }
  return out;
}

}  // namespace

TEST(Policy, ThreeConfidentWindowsFireOnce) {
  const DecisionPolicy p{0, 0.8, 3};
  const auto recs = apply_policy(fall_probs({0.95, 0.96, 0.97}), p);
  EXPECT_EQ(fall_windows(recs), (std::vector<std::size_t>{3}));
  EXPECT_EQ(recs.size(), 4u);  // every window plus the alarm
}

TEST(Policy, LowWindowResetsTheRun) {
  const DecisionPolicy p{0, 0.8, 3};
  EXPECT_EQ(fall_windows(apply_policy(fall_probs({0.95, 0.4, 0.95, 0.95, 0.95}), p)), (std::vector<std::size_t>{5}));
  // A long episode fires once and re-arms after a low window.
  EXPECT_EQ(fall_windows(apply_policy(fall_probs({0.9, 0.9, 0.9, 0.9, 0.9, 0.1, 0.9, 0.9, 0.9}), p)),
            (std::vector<std::size_t>{3, 9}));
}

TEST(Policy, MatchesLinearScanOracle) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> probs;
    for (int i = 0; i < 200; ++i) {
      const double p = rng.uniform() < 0.6 ? rng.uniform(0.8, 1.0) : rng.uniform(0.0, 0.8);
      probs.push_back({p, 1.0 - p});
    }
    const std::size_t k = 1 + rng.below(4);
    const DecisionPolicy pol{0, 0.8, k};
    std::vector<std::size_t> want;
    std::size_t run = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      run = probs[i][0] >= 0.8 ? run + 1 : 0;
      if (run == k) want.push_back(i + 1);
    }
    EXPECT_EQ(fall_windows(apply_policy(probs, pol)), want) << "k=" << k;
  }
}

TEST(Policy, Validation) {
  EXPECT_THROW((DecisionPolicy{0, 1.5, 3}.validate()), ConfigError);
  EXPECT_THROW((DecisionPolicy{0, 0.8, 0}.validate()), ConfigError);
}
