#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "falldet/csi/window.hpp"
#include "falldet/nn/ops.hpp"
#include "falldet/nn/parameter.hpp"

namespace falldet {
class Rng;
}

namespace falldet::har {

struct ModelConfig {
  std::size_t input_time = 500;     // T' after downsampling
  std::size_t input_features = 90;  // F
  std::size_t n_classes = 7;
  std::size_t embed_dim = 64;
  std::size_t heads = 4;
  std::size_t n_blocks = 2;
  std::vector<std::size_t> conv_kernels{3, 5, 7};
  double dropout = 0.1;
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError unless embed_dim % heads == 0, n_classes >= 2,
  /// kernels are odd and sizes are non-zero.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Two-stream convolution-augmented transformer classifier.
///
/// The temporal stream treats each time step as a token (F -> embed_dim),
/// the channel stream treats each feature as a token (T' -> embed_dim).
/// Each stream runs n_blocks of
///   h = LN(h + MHA(h));  h = LN(h + GELU(sum_k conv1d_k(h)))
/// followed by a mean over tokens. The two pooled vectors are concatenated
/// and fed to a dense head producing n_classes logits.
class HarModel {
 public:
  static constexpr std::string_view kHeadPrefix = "head.";

  explicit HarModel(ModelConfig cfg);

  // Members alias the parameter set's nodes; copying would share weights.
  HarModel(const HarModel&) = delete;
  HarModel& operator=(const HarModel&) = delete;
  HarModel(HarModel&&) = default;
  HarModel& operator=(HarModel&&) = default;

  const ModelConfig& config() const noexcept { return cfg_; }
  nn::ParameterSet& parameters() noexcept { return params_; }
  const nn::ParameterSet& parameters() const noexcept { return params_; }

  /// batch is [B, T', F]. With training=true dropout draws from `rng`.
  nn::Var forward(const nn::Var& batch, bool training = false, Rng* rng = nullptr) const;

  /// Logits [B, n_classes] without graph recording.
  nn::Tensor logits(const nn::Tensor& batch) const;
  /// Row-wise softmax probabilities, one vector per window.
  std::vector<std::vector<double>> predict_proba(std::span<const csi::AmplitudeWindow> windows) const;
  std::vector<int> predict(std::span<const csi::AmplitudeWindow> windows) const;

  /// Replaces head.weight / head.bias with a freshly initialised layer
  /// for `n_classes` outputs, seeded by `seed`.
  void reinit_head(std::size_t n_classes, std::uint64_t seed);

  static bool is_head(std::string_view name) { return name.substr(0, kHeadPrefix.size()) == kHeadPrefix; }

 private:
  struct Block {
    nn::AttentionParams attn;
    nn::Var norm1_gain, norm1_bias;
    std::vector<std::pair<nn::Var, nn::Var>> convs;  // (weight, bias) per kernel size
    nn::Var norm2_gain, norm2_bias;
  };
  struct Stream {
    nn::Var embed_w, embed_b;
    std::vector<Block> blocks;
  };

  Stream make_stream(const std::string& prefix, std::size_t token_dim, Rng& rng);
  nn::Var run_stream(const Stream& s, const nn::Var& tokens, const nn::Tensor* positional, bool training,
                     Rng* rng) const;
  void bind_head();

  ModelConfig cfg_;
  nn::ParameterSet params_;
  Stream temporal_;
  Stream channel_;
  nn::Var head_w_, head_b_;
  nn::Tensor positional_;  // fixed sinusoidal encoding [T', embed_dim]
};

/// Stacks windows into a [B, T', F] tensor.
nn::Tensor stack_windows(std::span<const csi::AmplitudeWindow> windows);
nn::Tensor stack_windows(std::span<const csi::AmplitudeWindow> windows, std::span<const std::size_t> indices);

}  // namespace falldet::har
