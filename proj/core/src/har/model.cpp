#include "falldet/har/model.hpp"

#include <cmath>
#include <string>

#include "falldet/error.hpp"
#include "falldet/rng.hpp"

namespace falldet::har {

using nn::Shape;
using nn::Tensor;
using nn::Var;

void ModelConfig::validate() const {
  if (input_time == 0 || input_features == 0) throw ConfigError("model input dimensions must be non-zero");
  if (n_classes < 2) throw ConfigError("model needs at least two classes");
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " must be a positive multiple of heads " +
                      std::to_string(heads));
  }
  if (n_blocks == 0) throw ConfigError("model needs at least one block");
  if (conv_kernels.empty()) throw ConfigError("conv_kernels must not be empty");
  for (std::size_t k : conv_kernels) {
    if (k % 2 == 0) throw ConfigError("conv kernel sizes must be odd, got " + std::to_string(k));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

HarModel::HarModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.rng_seed);
  temporal_ = make_stream("temporal", cfg_.input_features, rng);
  channel_ = make_stream("channel", cfg_.input_time, rng);
  const std::size_t pooled = 2 * cfg_.embed_dim;
  params_.add("head.weight", nn::uniform_init({cfg_.n_classes, pooled}, pooled, rng));
  params_.add("head.bias", nn::uniform_init({cfg_.n_classes}, pooled, rng));
  bind_head();

  positional_ = Tensor({cfg_.input_time, cfg_.embed_dim});
  for (std::size_t t = 0; t < cfg_.input_time; ++t) {
    for (std::size_t i = 0; i < cfg_.embed_dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(cfg_.embed_dim));
      const double angle = static_cast<double>(t) * freq;
      positional_[t * cfg_.embed_dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
}

void HarModel::bind_head() {
  head_w_ = params_.find("head.weight")->var;
  head_b_ = params_.find("head.bias")->var;
}

HarModel::Stream HarModel::make_stream(const std::string& prefix, std::size_t token_dim, Rng& rng) {
  const std::size_t e = cfg_.embed_dim;
  Stream s;
  s.embed_w = params_.add(prefix + ".embed.weight", nn::uniform_init({e, token_dim}, token_dim, rng));
  s.embed_b = params_.add(prefix + ".embed.bias", nn::uniform_init({e}, token_dim, rng));
  for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
    const std::string p = prefix + ".blocks." + std::to_string(b);
    Block blk;
    auto dense = [&](const std::string& name, Var& w, Var& bias) {
      w = params_.add(p + ".attn." + name + ".weight", nn::uniform_init({e, e}, e, rng));
      bias = params_.add(p + ".attn." + name + ".bias", nn::uniform_init({e}, e, rng));
    };
    dense("q", blk.attn.wq, blk.attn.bq);
    dense("k", blk.attn.wk, blk.attn.bk);
    dense("v", blk.attn.wv, blk.attn.bv);
    dense("o", blk.attn.wo, blk.attn.bo);
    blk.norm1_gain = params_.add(p + ".norm1.gain", Tensor({e}, 1.0));
    blk.norm1_bias = params_.add(p + ".norm1.bias", Tensor({e}, 0.0));
    for (std::size_t k : cfg_.conv_kernels) {
      const std::string c = p + ".conv.k" + std::to_string(k);
      const std::size_t fan_in = e * k;
      Var w = params_.add(c + ".weight", nn::uniform_init({e, e, k}, fan_in, rng));
      Var bias = params_.add(c + ".bias", nn::uniform_init({e}, fan_in, rng));
      blk.convs.emplace_back(w, bias);
    }
    blk.norm2_gain = params_.add(p + ".norm2.gain", Tensor({e}, 1.0));
    blk.norm2_bias = params_.add(p + ".norm2.bias", Tensor({e}, 0.0));
    s.blocks.push_back(std::move(blk));
  }
  return s;
}

Var HarModel::run_stream(const Stream& s, const Var& tokens, const Tensor* positional, bool training,
                         Rng* rng) const {
  static constexpr std::size_t kSwap[] = {0, 2, 1};
  const double p = training ? cfg_.dropout : 0.0;
  auto drop = [&](const Var& v) { return (p > 0.0 && rng) ? nn::dropout(v, p, true, *rng) : v; };

  Var h = nn::linear(tokens, s.embed_w, s.embed_b);
  if (positional) h = nn::add(h, Var(*positional));
  for (const auto& blk : s.blocks) {
    const Var a = nn::multi_head_attention(h, cfg_.heads, blk.attn);
    h = nn::layer_norm(nn::add(h, drop(a)), blk.norm1_gain, blk.norm1_bias);

    const Var channels_first = nn::transpose(h, kSwap);  // [B, E, S]
    Var bank;
    for (const auto& [w, bias] : blk.convs) {
      const Var c = nn::conv1d(channels_first, w, bias);
      bank = bank.defined() ? nn::add(bank, c) : c;
    }
    const Var conv = nn::transpose(nn::gelu(bank), kSwap);
    h = nn::layer_norm(nn::add(h, drop(conv)), blk.norm2_gain, blk.norm2_bias);
  }
  return nn::mean(h, 1);
}

Var HarModel::forward(const Var& batch, bool training, Rng* rng) const {
  const Shape& s = batch.shape();
  if (s.size() != 3 || s[1] != cfg_.input_time || s[2] != cfg_.input_features) {
    throw DimensionError("model expects [B, " + std::to_string(cfg_.input_time) + ", " +
                         std::to_string(cfg_.input_features) + "] input, got " + nn::to_string(s));
  }
  static constexpr std::size_t kSwap[] = {0, 2, 1};

  const Var temporal = run_stream(temporal_, batch, &positional_, training, rng);
  const Var channel = run_stream(channel_, nn::transpose(batch, kSwap), nullptr, training, rng);
  return nn::linear(nn::concat_last(temporal, channel), head_w_, head_b_);
}

Tensor HarModel::logits(const Tensor& batch) const {
  nn::NoGradGuard guard;
  return forward(Var(batch)).value();
}

std::vector<std::vector<double>> HarModel::predict_proba(std::span<const csi::AmplitudeWindow> windows) const {
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  constexpr std::size_t kChunk = 32;
  const std::size_t c = cfg_.n_classes;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const auto chunk = windows.subspan(start, std::min(kChunk, windows.size() - start));
    const Tensor z = logits(stack_windows(chunk));
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      std::vector<double> p(z.data().begin() + static_cast<std::ptrdiff_t>(b * c),
                            z.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * c));
      const double mx = *std::max_element(p.begin(), p.end());
      double total = 0.0;
      for (auto& v : p) total += (v = std::exp(v - mx));
      for (auto& v : p) v /= total;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<int> HarModel::predict(std::span<const csi::AmplitudeWindow> windows) const {
  std::vector<int> out;
  for (const auto& p : predict_proba(windows)) {
    out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return out;
}

void HarModel::reinit_head(std::size_t n_classes, std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("model needs at least two classes");
  Rng rng(seed ^ 0x4ead5eedULL);
  const std::size_t pooled = 2 * cfg_.embed_dim;
  auto* w = params_.find("head.weight");
  auto* b = params_.find("head.bias");
  w->var = Var(nn::uniform_init({n_classes, pooled}, pooled, rng), true);
  b->var = Var(nn::uniform_init({n_classes}, pooled, rng), true);
  cfg_.n_classes = n_classes;
  bind_head();
}

Tensor stack_windows(std::span<const csi::AmplitudeWindow> windows) {
  std::vector<std::size_t> idx(windows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return stack_windows(windows, idx);
}

Tensor stack_windows(std::span<const csi::AmplitudeWindow> windows, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DimensionError("cannot stack an empty batch");
  const std::size_t t = windows[indices[0]].time_len();
  const std::size_t f = windows[indices[0]].features();
  Tensor out({indices.size(), t, f});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& w = windows[indices[b]];
    if (w.time_len() != t || w.features() != f) throw DimensionError("windows in one batch differ in shape");
    std::copy(w.data.data.begin(), w.data.data.end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * t * f));
  }
  return out;
}

}  // namespace falldet::har
