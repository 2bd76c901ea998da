#include "falldet/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "falldet/error.hpp"
#include "falldet/nn/ops.hpp"
#include "falldet/rng.hpp"

namespace falldet::nn {

double relative_error(double a, double b) noexcept {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

GradCheckResult grad_check(const std::function<Var()>& loss, std::span<Var> inputs, const GradCheckOptions& options) {
  for (auto& in : inputs) in.zero_grad();
  {
    Var l = loss();
    if (l.size() != 1) throw DimensionError("grad_check needs a scalar loss, got " + to_string(l.shape()));
    l.backward();
  }

  auto eval = [&loss] {
    NoGradGuard guard;
    return loss().value()[0];
  };

  GradCheckResult result;
  Rng rng(options.seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Var& in = inputs[i];
    const Tensor analytic = in.has_grad() ? in.grad() : Tensor(in.shape(), 0.0);
    std::vector<std::size_t> coords(in.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords != 0 && coords.size() > options.max_coords) {
      rng.shuffle(coords.begin(), coords.end());
      coords.resize(options.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      double& x = in.value()[c];
      const double saved = x;
      x = saved + options.eps;
      const double f_plus = eval();
      x = saved - options.eps;
      const double f_minus = eval();
      x = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * options.eps);
      const double err = relative_error(analytic[c], numeric);
      ++result.coords_checked;
      if (err > result.max_rel_error || std::isnan(err)) {
        result.max_rel_error = std::isnan(err) ? INFINITY : err;
        result.worst_input = i;
        result.worst_index = c;
        result.worst_analytic = analytic[c];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

Var random_projection(const Var& out, std::uint64_t seed) {
  Rng rng(seed);
  Tensor r(out.shape());
  for (auto& v : r.data()) v = rng.normal();
  return sum(mul(out, Var(std::move(r))));
}

}  // namespace falldet::nn
