#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace falldet::csi {

/// Dense row-major real matrix.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const RealMatrix&, const RealMatrix&) = default;
};

/// T x F amplitude matrix; the classifier's input unit.
struct AmplitudeWindow {
  RealMatrix data;  // [time][feature]
  double sample_rate = 0.0;
  std::optional<int> label;
  std::string source_id;

  std::size_t time_len() const noexcept { return data.rows; }
  std::size_t features() const noexcept { return data.cols; }

  friend bool operator==(const AmplitudeWindow&, const AmplitudeWindow&) = default;
};

}  // namespace falldet::csi
