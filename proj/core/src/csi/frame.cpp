#include "falldet/csi/frame.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "falldet/error.hpp"

namespace falldet::csi {

CsiFrame CsiFrame::zeros(std::size_t n_rx, std::size_t n_tx, std::size_t n_sub) {
  CsiFrame f;
  f.n_rx = n_rx;
  f.n_tx = n_tx;
  f.n_sub = n_sub;
  f.csi.assign(n_rx * n_tx * n_sub, ComplexSample{});
  return f;
}

void CsiFrame::validate() const {
  if (n_rx < 1 || n_rx > 3) throw ConfigError("n_rx out of range [1,3]: " + std::to_string(n_rx));
  if (n_tx < 1 || n_tx > 3) throw ConfigError("n_tx out of range [1,3]: " + std::to_string(n_tx));
  if (n_sub < 1) throw ConfigError("n_sub must be >= 1");
  if (csi.size() != feature_count()) {
    throw ConfigError("csi tensor holds " + std::to_string(csi.size()) + " samples, expected " +
                      std::to_string(feature_count()));
  }
  for (const auto& s : csi) {
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) throw ConfigError("non-finite CSI sample");
  }
}

std::vector<double> amplitude(const CsiFrame& frame) {
  std::vector<double> out(frame.csi.size());
  std::transform(frame.csi.begin(), frame.csi.end(), out.begin(),
                 [](const ComplexSample& s) { return std::hypot(s.real(), s.imag()); });
  return out;
}

std::vector<double> to_db(std::span<const double> a, double floor) {
  if (!(floor > 0.0)) throw ConfigError("to_db floor must be positive");
  std::vector<double> out(a.size());
  std::transform(a.begin(), a.end(), out.begin(),
                 [floor](double v) { return 20.0 * std::log10(std::max(v, floor)); });
  return out;
}

}  // namespace falldet::csi
