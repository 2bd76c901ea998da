#include "falldet/nn/parameter.hpp"

#include <cmath>

#include "falldet/error.hpp"
#include "falldet/rng.hpp"

namespace falldet::nn {

Var ParameterSet::add(std::string name, Tensor init, bool trainable) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Var v(std::move(init), true);
  items_.push_back({std::move(name), v, trainable});
  return v;
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : items_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : items_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.var.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.var.zero_grad();
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace falldet::nn
