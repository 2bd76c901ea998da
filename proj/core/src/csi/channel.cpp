#include "falldet/csi/channel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "falldet/error.hpp"
#include "falldet/rng.hpp"

namespace falldet::csi {

void SynthChannelConfig::validate() const {
  if (frame_len < 1) throw ConfigError("frame_len must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
}

ComplexMatrix apply_channel(const CsiFrame& h, const SynthChannelConfig& cfg, const ComplexMatrix& x,
                            std::size_t subcarrier) {
  cfg.validate();
  if (h.n_rx != cfg.n_rx || h.n_tx != cfg.n_tx || h.n_sub != cfg.n_sub || h.csi.size() != h.feature_count()) {
    throw DimensionError("channel frame " + std::to_string(h.n_rx) + "x" + std::to_string(h.n_tx) + "x" +
                         std::to_string(h.n_sub) + " does not match config " + std::to_string(cfg.n_rx) + "x" +
                         std::to_string(cfg.n_tx) + "x" + std::to_string(cfg.n_sub));
  }
  if (x.rows != cfg.n_tx || x.cols != cfg.frame_len || x.data.size() != x.rows * x.cols) {
    throw DimensionError("transmit matrix is " + std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                         ", expected " + std::to_string(cfg.n_tx) + "x" + std::to_string(cfg.frame_len));
  }
  if (subcarrier >= cfg.n_sub) throw DimensionError("subcarrier index out of range");

  ComplexMatrix y(cfg.n_rx, cfg.frame_len);
  for (std::size_t r = 0; r < cfg.n_rx; ++r) {
    for (std::size_t t = 0; t < cfg.frame_len; ++t) {
      std::complex<double> acc{};
      for (std::size_t k = 0; k < cfg.n_tx; ++k) acc += h.at(r, k, subcarrier) * x(k, t);
      y(r, t) = acc;
    }
  }
  if (cfg.noise_std > 0.0) {
    Rng rng(cfg.rng_seed);
    for (auto& v : y.data) {
      const double re = rng.normal(0.0, cfg.noise_std);
      const double im = rng.normal(0.0, cfg.noise_std);
      v += std::complex<double>(re, im);
    }
  }
  return y;
}

CsiFrame multipath_frame(std::size_t n_rx, std::size_t n_tx, std::size_t n_sub, std::size_t paths, Rng& rng) {
  CsiFrame f = CsiFrame::zeros(n_rx, n_tx, n_sub);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (std::size_t p = 0; p < paths; ++p) {
    const double gain = rng.uniform(0.2, 1.0);
    const double delay = rng.uniform(0.0, 1.0);  // in units of one subcarrier period
    const double rx_phase = rng.uniform(0.0, kTwoPi);
    const double tx_phase = rng.uniform(0.0, kTwoPi);
    for (std::size_t r = 0; r < n_rx; ++r) {
      for (std::size_t t = 0; t < n_tx; ++t) {
        for (std::size_t s = 0; s < n_sub; ++s) {
          const double phase = kTwoPi * delay * static_cast<double>(s) + rx_phase * static_cast<double>(r) +
                               tx_phase * static_cast<double>(t);
          f.at(r, t, s) += std::polar(gain, -phase);
        }
      }
    }
  }
  double mean = 0.0;
  for (const auto& s : f.csi) mean += std::abs(s);
  mean /= static_cast<double>(f.csi.size());
  if (mean > 0.0) {
    for (auto& s : f.csi) s /= mean;
  }
  return f;
}

}  // namespace falldet::csi
