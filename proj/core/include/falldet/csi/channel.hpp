#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "falldet/csi/frame.hpp"

namespace falldet {
class Rng;
}

namespace falldet::csi {

/// Dense row-major complex matrix.
struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::complex<double>> data;

  ComplexMatrix() = default;
  ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  std::complex<double>& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const std::complex<double>& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;
};

struct SynthChannelConfig {
  std::size_t n_rx = 3;
  std::size_t n_tx = 1;
  std::size_t n_sub = 30;
  std::size_t frame_len = 1;  // samples per communication frame
  double noise_std = 0.0;     // per real/imag component
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Received signal for one subcarrier: Y = H_s X + N.
///
/// `x` is [n_tx][frame_len]; the result is [n_rx][frame_len]. N is i.i.d.
/// Gaussian with standard deviation `noise_std` on each real and imaginary
/// part, drawn from `cfg.rng_seed` in row-major order (re then im).
ComplexMatrix apply_channel(const CsiFrame& h, const SynthChannelConfig& cfg, const ComplexMatrix& x,
                            std::size_t subcarrier = 0);

/// Static multipath channel: a sum of `paths` rays with random gain,
/// delay and per-antenna phase, normalised to unit mean amplitude.
CsiFrame multipath_frame(std::size_t n_rx, std::size_t n_tx, std::size_t n_sub, std::size_t paths, Rng& rng);

}  // namespace falldet::csi
