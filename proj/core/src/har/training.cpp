#include "falldet/har/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "falldet/error.hpp"
#include "falldet/rng.hpp"

namespace falldet::har {

using csi::AmplitudeWindow;

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
}

Split split(std::span<const AmplitudeWindow> windows, const SplitSpec& spec, std::size_t n_classes) {
  spec.validate();
  Rng rng(spec.rng_seed);
  Split out;
  if (!spec.stratified) {
    std::vector<std::size_t> idx(windows.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx.begin(), idx.end());
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(idx.size())));
    out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  } else {
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto& label = windows[i].label;
      if (!label || *label < 0 || static_cast<std::size_t>(*label) >= n_classes) {
        throw ConfigError("window '" + windows[i].source_id + "' has no valid label");
      }
      by_class[static_cast<std::size_t>(*label)].push_back(i);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      auto& idx = by_class[c];
      if (idx.empty()) throw ConfigError("class " + std::to_string(c) + " has no samples");
      rng.shuffle(idx.begin(), idx.end());
      const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(idx.size())));
      out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
      out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

PreparedData prepare(std::span<const AmplitudeWindow> raw, const ingest::WindowingConfig& windowing,
                     const SplitSpec& split_spec, std::size_t n_classes) {
  const Split s = split(raw, split_spec, n_classes);
  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<AmplitudeWindow> picked;
    for (std::size_t i : idx) picked.push_back(raw[i]);
    return ingest::window_all(picked, windowing);
  };
  PreparedData d;
  d.train = gather(s.train);
  d.test = gather(s.test);
  if (d.train.empty()) throw ConfigError("training split is empty after windowing");
  if (windowing.normalization == ingest::Normalization::kZScorePerFeature) {
    d.stats = ingest::fit_normalizer(d.train);
    d.train = ingest::apply_normalizer(d.stats, d.train);
    d.test = ingest::apply_normalizer(d.stats, d.test);
  } else {
    const std::size_t f = d.train.front().features();
    d.stats.mean.assign(f, 0.0);
    d.stats.std.assign(f, 1.0);
  }
  return d;
}

const ModelCheckpoint& TrainResult::best() const {
  if (checkpoints.size() == 1) return checkpoints.front();
  return checkpoints.at(best_epoch);
}

std::optional<std::size_t> TrainResult::first_epoch_reaching(double threshold) const {
  for (const auto& m : history) {
    if (m.test_acc >= threshold) return m.epoch;
  }
  return std::nullopt;
}

std::pair<double, double> loss_and_accuracy(const HarModel& model, std::span<const AmplitudeWindow> windows) {
  if (windows.empty()) return {0.0, 0.0};
  nn::NoGradGuard guard;
  constexpr std::size_t kChunk = 32;
  double loss = 0.0;
  std::size_t correct = 0;
  const std::size_t c = model.config().n_classes;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const auto chunk = windows.subspan(start, std::min(kChunk, windows.size() - start));
    std::vector<int> labels;
    for (const auto& w : chunk) labels.push_back(w.label.value_or(-1));
    const nn::Var logits = model.forward(nn::Var(stack_windows(chunk)));
    loss += nn::cross_entropy(logits, labels).value()[0] * static_cast<double>(chunk.size());
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const auto row = logits.value().data().subspan(b * c, c);
      const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      if (pred == labels[b]) ++correct;
    }
  }
  const auto n = static_cast<double>(windows.size());
  return {loss / n, static_cast<double>(correct) / n};
}

TrainResult train(HarModel& model, std::span<const AmplitudeWindow> train_set, std::span<const AmplitudeWindow> test_set,
                  const TrainConfig& cfg) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");

  TrainResult result;
  auto record = [&](const EpochMetrics& m) {
    result.history.push_back(m);
    if (cfg.on_epoch) cfg.on_epoch(m);
    const bool better = result.history.size() == 1 || m.test_acc > result.history[result.best_epoch].test_acc;
    if (better) result.best_epoch = m.epoch;
    if (cfg.keep_all_checkpoints) {
      result.checkpoints.push_back(snapshot(model, m.epoch, result.history));
    } else if (better) {
      result.checkpoints.assign(1, snapshot(model, m.epoch, result.history));
    }
  };

  {
    const auto [loss, train_acc] = loss_and_accuracy(model, train_set);
    const double test_acc = loss_and_accuracy(model, test_set).second;
    record({0, train_acc, test_acc, loss});
  }

  Rng shuffle_rng(cfg.rng_seed);
  Rng dropout_rng(cfg.rng_seed ^ 0xd20b0a7ULL);
  nn::Adam adam(cfg.adam);
  auto& params = model.parameters().items();
  const std::size_t c = model.config().n_classes;
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(train_set[i].label.value_or(-1));

      model.parameters().zero_grad();
      const nn::Var logits = model.forward(nn::Var(stack_windows(train_set, idx)), true, &dropout_rng);
      nn::Var loss = nn::cross_entropy(logits, labels);
      const double l = loss.value()[0];
      if (!std::isfinite(l)) {
        throw NumericalError("non-finite loss " + std::to_string(l) + " at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch_no));
      }
      loss.backward();
      adam.step(params);

      loss_sum += l * static_cast<double>(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto row = logits.value().data().subspan(b * c, c);
        if (std::max_element(row.begin(), row.end()) - row.begin() == labels[b]) ++correct;
      }
    }
    const auto n = static_cast<double>(train_set.size());
    const double test_acc = loss_and_accuracy(model, test_set).second;
    record({epoch, static_cast<double>(correct) / n, test_acc, loss_sum / n});
    if (cfg.stop_when && cfg.stop_when(result.history.back())) break;
  }
  if (!cfg.keep_all_checkpoints) result.checkpoints.front().metrics = result.history;
  return result;
}

HarModel transfer(const ModelCheckpoint& pretrained, std::size_t n_new_classes, std::uint64_t head_seed,
                  bool freeze_body) {
  HarModel model = restore(pretrained);
  model.reinit_head(n_new_classes, head_seed);
  for (auto& p : model.parameters().items()) p.trainable = !freeze_body || HarModel::is_head(p.name);
  return model;
}

}  // namespace falldet::har
