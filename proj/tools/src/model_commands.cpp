#include <chrono>
#include <cstdio>
#include <sstream>

#include "cli.hpp"
#include "falldet/error.hpp"
#include "falldet/har/evaluation.hpp"
#include "falldet/har/grad_suite.hpp"
#include "falldet/har/training.hpp"
#include "falldet/ingest/dataset.hpp"

namespace falldet::cli {

namespace {

struct TrainArgs {
  std::filesystem::path data;
  std::filesystem::path checkpoint;  // transfer only
  bool freeze = false;
  std::size_t epochs = 50;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::size_t embed = 64;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::vector<std::size_t> kernels{3, 5, 7};
  double dropout = 0.1;
  double train_fraction = 0.8;
  std::size_t window_len = 0;  // 0: one window per instance
  std::size_t stride = 0;      // 0: window_len
  std::size_t downsample = 2;
  bool raw_amplitude = false;
  std::optional<double> stop_at;
};

void add_training_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--data", a.data, "dataset directory or manifest.json")->required();
  cmd->add_option("--epochs", a.epochs, "maximum epochs")->capture_default_str();
  cmd->add_option("--batch", a.batch, "mini-batch size")->capture_default_str();
  cmd->add_option("--lr", a.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--train-fraction", a.train_fraction, "per-class training share")->capture_default_str();
  cmd->add_option("--stop-at", a.stop_at, "stop once test accuracy reaches this value");
}

void add_architecture_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--embed", a.embed, "embedding width")->capture_default_str();
  cmd->add_option("--heads", a.heads, "attention heads")->capture_default_str();
  cmd->add_option("--blocks", a.blocks, "encoder blocks per stream")->capture_default_str();
  cmd->add_option("--kernels", a.kernels, "conv kernel sizes")->delimiter(',')->capture_default_str();
  cmd->add_option("--dropout", a.dropout, "dropout rate")->capture_default_str();
  cmd->add_option("--window-len", a.window_len, "window length in samples (0 = instance length)")
      ->capture_default_str();
  cmd->add_option("--stride", a.stride, "window stride in samples (0 = window length)")->capture_default_str();
  cmd->add_option("--downsample", a.downsample, "mean-pooling factor")->capture_default_str();
  cmd->add_flag("--raw-amplitude", a.raw_amplitude, "skip per-feature z-scoring");
}

struct Loaded {
  ingest::DatasetManifest manifest;
  std::vector<csi::AmplitudeWindow> raw;
};

Loaded load(const std::filesystem::path& data) {
  Loaded l;
  l.manifest = ingest::read_manifest(data);
  l.raw = ingest::load_csv_dataset(l.manifest);
  if (l.raw.empty()) throw ParseError("dataset " + data.string() + " has no instances");
  return l;
}

har::SplitSpec split_spec(const Globals& g, double fraction) {
  har::SplitSpec s;
  s.train_fraction = fraction;
  s.rng_seed = g.seed_or(1);
  return s;
}

har::TrainConfig train_config(const Globals& g, const TrainArgs& a) {
  har::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.adam.lr = a.lr;
  tc.rng_seed = g.seed_or(1);
  tc.keep_all_checkpoints = false;
  if (a.stop_at) {
    const double t = *a.stop_at;
    tc.stop_when = [t](const har::EpochMetrics& m) { return m.test_acc >= t; };
  }
  if (!g.quiet) {
    tc.on_epoch = [](const har::EpochMetrics& m) {
      std::fprintf(stderr, "epoch %zu  train_acc %.4f  test_acc %.4f  loss %.5f\n", m.epoch, m.train_acc, m.test_acc,
                   m.avg_loss);
    };
  }
  return tc;
}

/// Names must agree up to canonical spelling, in order.
void check_classes(const std::vector<std::string>& ckpt, const std::vector<std::string>& data) {
  bool same = ckpt.size() == data.size();
  for (std::size_t i = 0; same && i < ckpt.size(); ++i) {
    same = ingest::canonical_class_name(ckpt[i]) == ingest::canonical_class_name(data[i]);
  }
  if (!same) throw ConfigError("dataset classes do not match the checkpoint's classes");
}

Json class_json(const std::vector<std::string>& names) {
  Json j = Json::array();
  for (const auto& n : names) j.push_back(n);
  return j;
}

// Saves the best checkpoint with everything needed to evaluate it later.
int finish(const Globals& g, const std::filesystem::path& dir, const har::TrainResult& r, const Loaded& data,
           const har::PreparedData& p, const ingest::WindowingConfig& w, std::optional<double> stop_at) {
  har::ModelCheckpoint best = r.best();
  best.class_names = data.manifest.class_names;
  best.normalizer = p.stats;
  best.windowing = w;
  har::save_checkpoint(best, dir / "model.ckpt");

  const har::HarModel model = har::restore(best);
  const har::Evaluation ev = har::evaluate(model, p.test);
  write_text(dir / "history.csv", har::history_csv(r.history));
  write_text(dir / "confusion.csv", har::confusion_csv(ev, data.manifest.class_names));

  Json j;
  j["checkpoint"] = (dir / "model.ckpt").string();
  j["classes"] = class_json(data.manifest.class_names);
  j["train_windows"] = p.train.size();
  j["test_windows"] = p.test.size();
  j["epochs_run"] = r.history.size() - 1;
  j["best_epoch"] = r.best_epoch;
  j["best_test_acc"] = r.history[r.best_epoch].test_acc;
  j["test_acc"] = ev.accuracy;
  if (stop_at) {
    const auto reached = r.first_epoch_reaching(*stop_at);
    j["first_epoch_reaching_target"] = reached ? Json(*reached) : Json(nullptr);
  }
  emit(g, j);
  return kOk;
}

ingest::WindowingConfig windowing(const TrainArgs& a, const std::vector<csi::AmplitudeWindow>& raw) {
  ingest::WindowingConfig w;
  std::size_t shortest = raw.front().time_len();
  for (const auto& r : raw) shortest = std::min(shortest, r.time_len());
  w.window_len = a.window_len ? a.window_len : shortest;
  w.stride = a.stride ? a.stride : w.window_len;
  w.downsample = a.downsample;
  w.normalization = a.raw_amplitude ? ingest::Normalization::kNone : ingest::Normalization::kZScorePerFeature;
  w.validate();
  return w;
}

struct EvalArgs {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::string split = "test";
  double train_fraction = 0.8;
};

int run_eval(const Globals& g, const EvalArgs& a) {
  const har::ModelCheckpoint ckpt = har::load_checkpoint(a.checkpoint);
  if (!ckpt.windowing || !ckpt.normalizer) {
    throw ConfigError("checkpoint " + a.checkpoint.string() + " carries no windowing/normaliser; re-train with this tool");
  }
  const Loaded data = load(a.data);
  if (!ckpt.class_names.empty()) check_classes(ckpt.class_names, data.manifest.class_names);

  std::vector<csi::AmplitudeWindow> chosen;
  if (a.split == "all") {
    chosen = data.raw;
  } else {
    const auto s = har::split(data.raw, split_spec(g, a.train_fraction), data.manifest.n_classes());
    for (std::size_t i : s.test) chosen.push_back(data.raw[i]);
  }
  auto windows = ingest::window_all(chosen, *ckpt.windowing);
  if (ckpt.windowing->normalization == ingest::Normalization::kZScorePerFeature) {
    windows = ingest::apply_normalizer(*ckpt.normalizer, windows);
  }
  if (windows.empty()) throw ConfigError("no windows to evaluate");

  const har::HarModel model = har::restore(ckpt);
  const har::Evaluation ev = har::evaluate(model, windows);
  const std::string csv = har::confusion_csv(ev, data.manifest.class_names);

  Json j;
  j["split"] = a.split;
  j["windows"] = ev.total;
  j["accuracy"] = ev.accuracy;
  j["classes"] = class_json(data.manifest.class_names);
  j["confusion"] = ev.confusion;
  j["counts"] = ev.counts;
  if (const auto dir = out_dir(g, false, "eval"); !dir.empty()) {
    write_text(dir / "confusion.csv", csv);
    write_text(dir / "metrics.json", j.dump(2) + "\n");
  }
  std::ostringstream text;
  text << "accuracy " << ev.accuracy << " over " << ev.total << " windows\n" << csv;
  emit(g, j, csv, text.str());
  return kOk;
}

int run_grad_check(const Globals& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = har::run_gradient_suite(g.seed_or(1));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool ok = true;
  Json cases = Json::array();
  std::ostringstream csv, text;
  csv << "case,metric,max_error,tolerance,coords,passed\n";
  for (const auto& r : results) {
    ok = ok && r.passed;
    const char* metric = r.absolute ? "absolute" : "relative";
    Json c;
    c["case"] = r.name;
    c["metric"] = metric;
    c["max_error"] = r.max_rel_error;
    c["tolerance"] = r.tolerance;
    c["coords"] = r.coords;
    c["passed"] = r.passed;
    cases.push_back(c);
    csv << r.name << ',' << metric << ',' << r.max_rel_error << ',' << r.tolerance << ',' << r.coords << ','
        << (r.passed ? 1 : 0) << '\n';
    char line[160];
    std::snprintf(line, sizeof line, "%-26s %-8s %.3e < %.0e  %s\n", r.name.c_str(), metric, r.max_rel_error,
                  r.tolerance, r.passed ? "ok" : "FAIL");
    text << line;
  }
  Json j;
  j["cases"] = cases;
  j["passed"] = ok;
  j["seconds"] = secs;
  if (const auto dir = out_dir(g, false, "grad-check"); !dir.empty()) write_text(dir / "grad_check.csv", csv.str());
  emit(g, j, csv.str(), text.str());
  return ok ? kOk : kNumerical;
}

}  // namespace

void add_model_commands(CLI::App& app, Globals& g, Action& action) {
  auto ta = std::make_shared<TrainArgs>();
  auto* train = app.add_subcommand("train", "train a classifier from scratch");
  add_training_flags(train, *ta);
  add_architecture_flags(train, *ta);
  train->callback([&g, &action, ta] {
    action = [&g, ta] {
      const auto dir = out_dir(g, true, "train");
      const Loaded data = load(ta->data);
      const auto w = windowing(*ta, data.raw);
      const auto p = har::prepare(data.raw, w, split_spec(g, ta->train_fraction), data.manifest.n_classes());
      har::ModelConfig mc;
      mc.input_time = p.train.front().time_len();
      mc.input_features = p.train.front().features();
      mc.n_classes = data.manifest.n_classes();
      mc.embed_dim = ta->embed;
      mc.heads = ta->heads;
      mc.n_blocks = ta->blocks;
      mc.conv_kernels = ta->kernels;
      mc.dropout = ta->dropout;
      mc.rng_seed = g.seed_or(1);
      har::HarModel model(mc);
      const auto r = har::train(model, p.train, p.test, train_config(g, *ta));
      return finish(g, dir, r, data, p, w, ta->stop_at);
    };
  });

  auto xa = std::make_shared<TrainArgs>();
  auto* transfer = app.add_subcommand("transfer", "fine-tune a pretrained checkpoint with a new classification head");
  transfer->add_option("--checkpoint", xa->checkpoint, "pretrained checkpoint")->required();
  transfer->add_flag("--freeze", xa->freeze, "train the new head only");
  add_training_flags(transfer, *xa);
  transfer->callback([&g, &action, xa] {
    action = [&g, xa] {
      const auto dir = out_dir(g, true, "transfer");
      const har::ModelCheckpoint pre = har::load_checkpoint(xa->checkpoint);
      if (!pre.windowing) throw ConfigError("checkpoint " + xa->checkpoint.string() + " carries no windowing");
      const Loaded data = load(xa->data);
      const auto p = har::prepare(data.raw, *pre.windowing, split_spec(g, xa->train_fraction), data.manifest.n_classes());
      if (p.train.front().time_len() != pre.config.input_time ||
          p.train.front().features() != pre.config.input_features) {
        throw ConfigError("dataset windows are " + std::to_string(p.train.front().time_len()) + "x" +
                          std::to_string(p.train.front().features()) + " but the checkpoint expects " +
                          std::to_string(pre.config.input_time) + "x" + std::to_string(pre.config.input_features));
      }
      har::HarModel model = har::transfer(pre, data.manifest.n_classes(), g.seed_or(1), xa->freeze);
      const auto r = har::train(model, p.train, p.test, train_config(g, *xa));
      return finish(g, dir, r, data, p, *pre.windowing, xa->stop_at);
    };
  });

  auto ea = std::make_shared<EvalArgs>();
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint and write its confusion matrix");
  eval->add_option("--checkpoint", ea->checkpoint, "checkpoint to evaluate")->required();
  eval->add_option("--data", ea->data, "dataset directory or manifest.json")->required();
  eval->add_option("--split", ea->split, "test: held-out part for --seed, all: every instance")
      ->check(CLI::IsMember({"test", "all"}))
      ->capture_default_str();
  eval->add_option("--train-fraction", ea->train_fraction, "must match training")->capture_default_str();
  eval->callback([&g, &action, ea] { action = [&g, ea] { return run_eval(g, *ea); }; });

  auto* grad = app.add_subcommand("grad-check", "finite-difference check of every op and a tiny model");
  grad->callback([&g, &action] { action = [&g] { return run_grad_check(g); }; });
}

}  // namespace falldet::cli
