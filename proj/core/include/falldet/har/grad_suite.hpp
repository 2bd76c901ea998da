#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace falldet::har {

struct GradCaseResult {
  std::string name;
  double max_rel_error = 0.0;  // absolute error for cases marked `absolute`
  double tolerance = 0.0;
  bool absolute = false;
  std::size_t coords = 0;
  bool passed = false;
};

inline constexpr double kOpGradTolerance = 1e-5;
inline constexpr double kModelGradTolerance = 1e-4;

/// Central-difference checks of every differentiable op plus a tiny
/// end-to-end classifier, all in double precision.
std::vector<GradCaseResult> run_gradient_suite(std::uint64_t seed = 1);

}  // namespace falldet::har
