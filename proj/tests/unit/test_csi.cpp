#include <gtest/gtest.h>

#include <cmath>

#include "falldet/csi/channel.hpp"
#include "falldet/csi/frame.hpp"
#include "falldet/error.hpp"
#include "falldet/rng.hpp"

using namespace falldet;
using namespace falldet::csi;

TEST(Amplitude, PythagoreanTriple) {
  CsiFrame f = CsiFrame::zeros(1, 1, 1);
  f.csi[0] = {3.0, 4.0};
  const auto a = amplitude(f);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_DOUBLE_EQ(a[0], 5.0);
}

TEST(Amplitude, ZerosStayZero) {
  const auto a = amplitude(CsiFrame::zeros(3, 2, 30));
  ASSERT_EQ(a.size(), 180u);
  for (double v : a) EXPECT_EQ(v, 0.0);
}

TEST(Amplitude, MatchesElementLoop) {
  Rng rng(3);
  CsiFrame f = CsiFrame::zeros(3, 2, 30);
  for (auto& s : f.csi) s = {rng.uniform(-50, 50), rng.uniform(-50, 50)};
  const auto a = amplitude(f);
  for (std::size_t i = 0; i < f.csi.size(); ++i) {
    const double re = f.csi[i].real(), im = f.csi[i].imag();
    EXPECT_NEAR(a[i], std::sqrt(re * re + im * im), 1e-12);
  }
}

TEST(Amplitude, FlatteningIsPairMajor) {
  CsiFrame f = CsiFrame::zeros(3, 1, 30);
  f.at(2, 0, 7) = {1.0, 0.0};
  const auto a = amplitude(f);
  EXPECT_EQ(a[2 * 30 + 7], 1.0);
  EXPECT_EQ(flat_index({2, 0, 7}, 1, 30), 67u);
  const auto back = unflatten(67, 1, 30);
  EXPECT_EQ(back, (AntennaIndex{2, 0, 7}));
}

TEST(ToDb, KnownValues) {
  const std::vector<double> in{1.0, 10.0, 0.0};
  const auto db = to_db(in);
  EXPECT_DOUBLE_EQ(db[0], 0.0);
  EXPECT_DOUBLE_EQ(db[1], 20.0);
  EXPECT_NEAR(db[2], -240.0, 1e-9);
}

TEST(Frame, ValidateRejectsBadShapes) {
  CsiFrame f = CsiFrame::zeros(3, 1, 30);
  f.csi.pop_back();
  EXPECT_THROW(f.validate(), ConfigError);
  CsiFrame g = CsiFrame::zeros(1, 1, 1);
  g.csi[0] = {std::nan(""), 0.0};
  EXPECT_THROW(g.validate(), ConfigError);
}

namespace {

SynthChannelConfig cfg2x2(std::size_t len, double noise, std::uint64_t seed) {
  SynthChannelConfig c;
  c.n_rx = 2;
  c.n_tx = 2;
  c.n_sub = 1;
  c.frame_len = len;
  c.noise_std = noise;
  c.rng_seed = seed;
  return c;
}

}  // namespace

TEST(Channel, IdentityPassesSignalThrough) {
  CsiFrame h = CsiFrame::zeros(2, 2, 1);
  h.at(0, 0, 0) = 1.0;
  h.at(1, 1, 0) = 1.0;
  ComplexMatrix x(2, 3);
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = {double(i), -double(i)};
  EXPECT_EQ(apply_channel(h, cfg2x2(3, 0.0, 0), x), x);
}

TEST(Channel, ZeroInputGivesZero) {
  Rng rng(1);
  CsiFrame h = multipath_frame(2, 2, 1, 4, rng);
  const ComplexMatrix y = apply_channel(h, cfg2x2(4, 0.0, 0), ComplexMatrix(2, 4));
  for (const auto& v : y.data) EXPECT_EQ(v, std::complex<double>{});
}

TEST(Channel, MatchesMatmulPlusNoiseOracle) {
  Rng rng(11);
  CsiFrame h = CsiFrame::zeros(2, 2, 1);
  for (auto& s : h.csi) s = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  ComplexMatrix x(2, 5);
  for (auto& v : x.data) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  const auto cfg = cfg2x2(5, 0.3, 42);
  const ComplexMatrix y = apply_channel(h, cfg, x);

  Rng noise(42);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t t = 0; t < 5; ++t) {
      double re = 0.0, im = 0.0;
      for (std::size_t k = 0; k < 2; ++k) {
        const auto a = h.csi[r * 2 + k];
        const auto b = x.data[k * 5 + t];
        re += a.real() * b.real() - a.imag() * b.imag();
        im += a.real() * b.imag() + a.imag() * b.real();
      }
      re += 0.3 * noise.normal();
      im += 0.3 * noise.normal();
      EXPECT_NEAR(y(r, t).real(), re, 1e-12);
      EXPECT_NEAR(y(r, t).imag(), im, 1e-12);
    }
  }
}

TEST(Channel, ShapeMismatchThrows) {
  CsiFrame h = CsiFrame::zeros(3, 1, 30);
  EXPECT_THROW(apply_channel(h, cfg2x2(1, 0.0, 0), ComplexMatrix(2, 1)), DimensionError);
}

TEST(Channel, MultipathIsDeterministic) {
  Rng a(5), b(5);
  EXPECT_EQ(multipath_frame(3, 1, 30, 6, a), multipath_frame(3, 1, 30, 6, b));
}
