#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace falldet::csi {

using ComplexSample = std::complex<double>;

/// Position of one CSI sample inside a frame.
struct AntennaIndex {
  std::size_t rx = 0;
  std::size_t tx = 0;
  std::size_t sub = 0;

  friend bool operator==(const AntennaIndex&, const AntennaIndex&) = default;
};

/// Canonical flattening: antenna-pair-major, subcarrier-minor.
/// For a 3x1x30 frame this yields the usual 90-column layout.
constexpr std::size_t flat_index(const AntennaIndex& i, std::size_t n_tx, std::size_t n_sub) noexcept {
  return (i.rx * n_tx + i.tx) * n_sub + i.sub;
}

constexpr AntennaIndex unflatten(std::size_t k, std::size_t n_tx, std::size_t n_sub) noexcept {
  const std::size_t pair = k / n_sub;
  return {pair / n_tx, pair % n_tx, k % n_sub};
}

inline constexpr int kNoiseUnknown = -127;

/// One CSI measurement: complex gains per (rx, tx, subcarrier) plus radio metadata.
struct CsiFrame {
  double timestamp = 0.0;  // seconds
  std::size_t n_rx = 1;
  std::size_t n_tx = 1;
  std::size_t n_sub = 1;
  std::vector<ComplexSample> csi;  // canonical flattening, size n_rx*n_tx*n_sub
  std::array<int, 3> rssi{};       // dB, unused antennas carry 0
  int agc = 0;                     // dB
  int noise_floor = kNoiseUnknown; // dBm

  // Fields carried through from the binary trace format.
  std::uint16_t bfee_count = 0;
  std::uint16_t rate = 0;
  std::uint8_t antenna_sel = 0;

  static CsiFrame zeros(std::size_t n_rx, std::size_t n_tx, std::size_t n_sub);

  std::size_t feature_count() const noexcept { return n_rx * n_tx * n_sub; }

  ComplexSample& at(std::size_t rx, std::size_t tx, std::size_t sub) {
    return csi[flat_index({rx, tx, sub}, n_tx, n_sub)];
  }
  const ComplexSample& at(std::size_t rx, std::size_t tx, std::size_t sub) const {
    return csi[flat_index({rx, tx, sub}, n_tx, n_sub)];
  }

  /// Throws ConfigError when counts are out of range, the tensor size
  /// does not match, or a sample is not finite.
  void validate() const;

  friend bool operator==(const CsiFrame&, const CsiFrame&) = default;
};

/// |h| per sample in canonical order.
std::vector<double> amplitude(const CsiFrame& frame);

/// 20*log10(max(a, floor)) element-wise.
std::vector<double> to_db(std::span<const double> a, double floor = 1e-12);

}  // namespace falldet::csi
