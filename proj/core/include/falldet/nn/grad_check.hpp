#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "falldet/nn/autograd.hpp"

namespace falldet::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t max_coords = 0;  // per input; 0 checks every coordinate
  std::uint64_t seed = 0;      // coordinate sampling
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b) noexcept;

/// Compares reverse-mode gradients of the scalar `loss` against central
/// differences (f(x+eps) - f(x-eps)) / (2 eps) for sampled coordinates of
/// each input. `loss` is re-evaluated with the inputs perturbed in place
/// and must be deterministic.
GradCheckResult grad_check(const std::function<Var()>& loss, std::span<Var> inputs,
                           const GradCheckOptions& options = {});

/// sum(out * R) with R ~ N(0,1) drawn from `seed`: turns any tensor-valued
/// graph into a scalar whose gradient exercises every output element.
Var random_projection(const Var& out, std::uint64_t seed);

}  // namespace falldet::nn
