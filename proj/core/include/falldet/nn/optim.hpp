#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "falldet/nn/parameter.hpp"

namespace falldet::nn {

/// Plain gradient descent: p -= lr * g.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(std::span<Parameter> params) const;

 private:
  double lr_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are bound to parameter
/// positions, so the same span must be passed to every step.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(std::span<Parameter> params);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

}  // namespace falldet::nn
