#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "falldet/nn/autograd.hpp"

namespace falldet {
class Rng;
}

namespace falldet::nn {

struct Parameter {
  std::string name;  // hierarchical, e.g. "head.weight"
  Var var;
  bool trainable = true;
};

/// Ordered, uniquely named collection of parameters.
class ParameterSet {
 public:
  /// Registers a leaf that requires a gradient. Throws ConfigError on a duplicate name.
  Var add(std::string name, Tensor init, bool trainable = true);

  std::vector<Parameter>& items() noexcept { return items_; }
  const std::vector<Parameter>& items() const noexcept { return items_; }

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<Parameter> items_;
};

/// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in))
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace falldet::nn
