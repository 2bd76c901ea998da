#include "falldet/nn/optim.hpp"

#include <cmath>

namespace falldet::nn {

void Sgd::step(std::span<Parameter> params) const {
  for (auto& p : params) {
    if (!p.trainable || !p.var.has_grad()) continue;
    auto& value = p.var.value();
    const auto& grad = p.var.grad();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr_ * grad[i];
  }
}

void Adam::step(std::span<Parameter> params) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].var.size(), 0.0);
      v_[i].assign(params[i].var.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable || !p.var.has_grad()) continue;
    auto& value = p.var.value();
    const auto& grad = p.var.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      value[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace falldet::nn
