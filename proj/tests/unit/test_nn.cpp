#include <gtest/gtest.h>

#include <cmath>

#include "falldet/error.hpp"
#include "falldet/nn/grad_check.hpp"
#include "falldet/nn/ops.hpp"
#include "falldet/nn/optim.hpp"
#include "falldet/nn/parameter.hpp"
#include "falldet/nn/serialize.hpp"
#include "falldet/rng.hpp"

using namespace falldet;
using namespace falldet::nn;

namespace {

Tensor random(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Var leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) { return Var(random(std::move(shape), rng, lo, hi), true); }

}  // namespace

TEST(Ops, SoftmaxOfZerosIsUniform) {
  const Var y = softmax(Var(Tensor({4}, 0.0)));
  for (double v : y.value().data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Ops, SoftmaxIsStableForLargeInputs) {
  const Var y = softmax(Var(Tensor({3}, {1000.0, 1000.0, -1000.0})));
  EXPECT_NEAR(y.value()[0], 0.5, 1e-12);
  EXPECT_EQ(y.value()[2], 0.0);
}

TEST(Ops, LayerNormOfConstantIsZero) {
  const Var y = layer_norm(Var(Tensor({5}, 3.3)), Var(Tensor({5}, 1.0)), Var(Tensor({5}, 0.0)));
  for (double v : y.value().data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Ops, Conv1dIdentityKernel) {
  const Var x(Tensor({1, 1, 3}, {1, 2, 3}));
  const Var y = conv1d(x, Var(Tensor({1, 1, 1}, 1.0)), Var(Tensor({1}, 0.0)));
  EXPECT_EQ(y.value().storage(), (std::vector<double>{1, 2, 3}));
}

TEST(Ops, Conv1dSamePaddingOracle) {
  Rng rng(2);
  const Tensor x = random({2, 3, 6}, rng), w = random({4, 3, 5}, rng), b = random({4}, rng);
  const Var y = conv1d(Var(x), Var(w), Var(b));
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t o = 0; o < 4; ++o) {
      for (std::size_t t = 0; t < 6; ++t) {
        double acc = b[o];
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t k = 0; k < 5; ++k) {
            const long src = long(t) + long(k) - 2;
            if (src >= 0 && src < 6) acc += w[(o * 3 + c) * 5 + k] * x[(n * 3 + c) * 6 + std::size_t(src)];
          }
        }
        EXPECT_NEAR(y.value()[(n * 4 + o) * 6 + t], acc, 1e-12);
      }
    }
  }
}

TEST(Ops, MatmulOracle) {
  Rng rng(3);
  const Tensor a = random({2, 3, 4}, rng), b = random({4, 5}, rng);
  const Var y = matmul(Var(a), Var(b));
  ASSERT_EQ(y.shape(), (Shape{2, 3, 5}));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += a[i * 4 + k] * b[k * 5 + j];
      EXPECT_NEAR(y.value()[i * 5 + j], acc, 1e-12);
    }
  }
}

TEST(Ops, ShapeMismatchNamesOperands) {
  try {
    matmul(Var(Tensor({2, 3})), Var(Tensor({4, 5})));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4, 5]"), std::string::npos) << msg;
  }
}

TEST(Ops, CrossEntropyKnownValues) {
  const std::array<int, 2> labels{0, 2};
  const Var uniform = cross_entropy(Var(Tensor({2, 3}, 0.0)), labels);
  EXPECT_NEAR(uniform.value()[0], std::log(3.0), 1e-12);
  const Var sure = cross_entropy(Var(Tensor({2, 3}, {500, 0, 0, 0, 0, 500})), labels);
  EXPECT_NEAR(sure.value()[0], 0.0, 1e-12);
}

TEST(Ops, DropoutIsIdentityWhenEvaluating) {
  Rng rng(1), mask(2);
  const Tensor x = random({10}, rng);
  EXPECT_EQ(dropout(Var(x), 0.5, false, mask).value(), x);
  const Var d = dropout(Var(x), 0.5, true, mask);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_TRUE(d.value()[i] == 0.0 || std::abs(d.value()[i] - 2.0 * x[i]) < 1e-15);
  }
}

namespace {

AttentionParams attention_params(std::size_t d, Rng& rng) {
  auto w = [&] { return Var(random({d, d}, rng, -0.5, 0.5), true); };
  auto b = [&] { return Var(random({d}, rng, -0.5, 0.5), true); };
  AttentionParams p;
  p.wq = w(); p.bq = b(); p.wk = w(); p.bk = b(); p.wv = w(); p.bv = b(); p.wo = w(); p.bo = b();
  return p;
}

// y = x W^T + b for one token.
std::vector<double> project(const double* x, const Tensor& w, const Tensor& b, std::size_t d) {
  std::vector<double> y(d);
  for (std::size_t o = 0; o < d; ++o) {
    y[o] = b[o];
    for (std::size_t i = 0; i < d; ++i) y[o] += w[o * d + i] * x[i];
  }
  return y;
}

}  // namespace

TEST(Attention, MatchesNaivePerHeadLoop) {
  Rng rng(4);
  const std::size_t B = 2, S = 5, D = 8, H = 2, dh = D / H;
  const Tensor x = random({B, S, D}, rng);
  const AttentionParams p = attention_params(D, rng);
  Tensor weights;
  const Var y = multi_head_attention(Var(x), H, p, &weights);

  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::vector<double>> q(S), k(S), v(S);
    for (std::size_t s = 0; s < S; ++s) {
      const double* xs = x.data().data() + (b * S + s) * D;
      q[s] = project(xs, p.wq.value(), p.bq.value(), D);
      k[s] = project(xs, p.wk.value(), p.bk.value(), D);
      v[s] = project(xs, p.wv.value(), p.bv.value(), D);
    }
    std::vector<std::vector<double>> ctx(S, std::vector<double>(D, 0.0));
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < S; ++i) {
        std::vector<double> score(S);
        double mx = -INFINITY, z = 0.0;
        for (std::size_t j = 0; j < S; ++j) {
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) dot += q[i][h * dh + c] * k[j][h * dh + c];
          score[j] = dot / std::sqrt(double(dh));
          mx = std::max(mx, score[j]);
        }
        for (auto& s : score) z += (s = std::exp(s - mx));
        for (std::size_t j = 0; j < S; ++j) {
          const double a = score[j] / z;
          EXPECT_NEAR(weights[((b * H + h) * S + i) * S + j], a, 1e-12);
          for (std::size_t c = 0; c < dh; ++c) ctx[i][h * dh + c] += a * v[j][h * dh + c];
        }
      }
    }
    for (std::size_t s = 0; s < S; ++s) {
      const auto out = project(ctx[s].data(), p.wo.value(), p.bo.value(), D);
      for (std::size_t o = 0; o < D; ++o) EXPECT_NEAR(y.value()[(b * S + s) * D + o], out[o], 1e-10);
    }
  }
}

TEST(Attention, WeightRowsSumToOne) {
  Rng rng(5);
  const AttentionParams p = attention_params(8, rng);
  Tensor w;
  multi_head_attention(Var(random({3, 6, 8}, rng, -3, 3)), 4, p, &w);
  for (std::size_t row = 0; row < w.size() / 6; ++row) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += w[row * 6 + j];
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Attention, SingleTokenIsValueProjection) {
  Rng rng(6);
  const AttentionParams p = attention_params(4, rng);
  const Tensor x = random({1, 1, 4}, rng);
  const Var y = multi_head_attention(Var(x), 2, p);
  const auto v = project(x.data().data(), p.wv.value(), p.bv.value(), 4);
  const auto out = project(v.data(), p.wo.value(), p.bo.value(), 4);
  for (std::size_t o = 0; o < 4; ++o) EXPECT_NEAR(y.value()[o], out[o], 1e-12);
}

TEST(Attention, HeadsMustDivideWidth) {
  Rng rng(7);
  EXPECT_THROW(multi_head_attention(Var(random({1, 2, 6}, rng)), 4, attention_params(6, rng)), ConfigError);
}

TEST(GradCheck, CrossEntropyWithinOneInAMillion) {
  Rng rng(8);
  std::vector<Var> in{leaf({4, 5}, rng, -2, 2)};
  const std::array<int, 4> labels{1, 0, 4, 2};
  const auto r = grad_check([&] { return cross_entropy(in[0], labels); }, in);
  EXPECT_LT(r.max_rel_error, 1e-6);
  EXPECT_EQ(r.coords_checked, 20u);
}

TEST(GradCheck, LinearLayerBelowOneInTenMillion) {
  Rng rng(9);
  std::vector<Var> in{leaf({3, 4}, rng), leaf({2, 4}, rng), leaf({2}, rng)};
  const auto r = grad_check([&] { return random_projection(linear(in[0], in[1], in[2]), 1); }, in);
  EXPECT_LT(r.max_rel_error, 1e-7);
}

TEST(GradCheck, AttentionBlockBelowTolerance) {
  Rng rng(10);
  const AttentionParams p = attention_params(4, rng);
  std::vector<Var> in{leaf({2, 3, 4}, rng), p.wq, p.bq, p.wk, p.wv, p.bv, p.wo, p.bo};
  const auto r = grad_check([&] { return random_projection(multi_head_attention(in[0], 2, p), 2); }, in);
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(GradCheck, DetectsAWrongGradient) {
  Rng rng(11);
  std::vector<Var> in{leaf({3}, rng)};
  auto bad = [&] {
    Var a = in[0];
    return make_node(Tensor({1}, {a.value()[0] * a.value()[0]}), {a},
                     [a](Node& n) mutable { a.grad()[0] += n.grad[0] * 3.0 * a.value()[0]; });
  };
  EXPECT_GT(grad_check(bad, in).max_rel_error, 0.1);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_NEAR(relative_error(0.0, 1e-10), 1e-10 / 1e-8, 1e-15);
}

TEST(Autograd, NoGradGuardSkipsGraph) {
  Rng rng(12);
  const Var a = leaf({2}, rng);
  NoGradGuard guard;
  const Var y = sum(a);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Autograd, GradientsAccumulateOverSharedInputs) {
  Var a(Tensor({1}, {3.0}), true);
  sum(add(a, a)).backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 2.0);
}

TEST(Optim, ZeroGradLeavesParametersUnchanged) {
  ParameterSet ps;
  Var w = ps.add("w", Tensor({3}, {1, 2, 3}));
  w.grad();  // allocated, all zero
  Adam adam;
  adam.step(ps.items());
  EXPECT_EQ(w.value().storage(), (std::vector<double>{1, 2, 3}));
  Sgd(0.1).step(ps.items());
  EXPECT_EQ(w.value().storage(), (std::vector<double>{1, 2, 3}));
}

TEST(Optim, SgdOnSquare) {
  ParameterSet ps;
  Var w = ps.add("w", Tensor({1}, {1.0}));
  sum(mul(w, w)).backward();
  Sgd(0.1).step(ps.items());
  EXPECT_DOUBLE_EQ(w.value()[0], 0.8);
}

TEST(Optim, AdamFirstStepIsLrWhateverTheScale) {
  for (double g : {1e-4, 1.0, 250.0, -3e3}) {
    ParameterSet ps;
    Var w = ps.add("w", Tensor({1}, {0.0}));
    w.grad()[0] = g;
    Adam adam({.lr = 0.01});
    adam.step(ps.items());
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    EXPECT_NEAR(w.value()[0], -0.01 * g / (std::abs(g) + 1e-8), 1e-15);
    EXPECT_NEAR(std::abs(w.value()[0]), 0.01, 1e-6);
  }
}

TEST(Optim, FrozenParametersDoNotMove) {
  ParameterSet ps;
  Var w = ps.add("w", Tensor({1}, {1.0}), false);
  w.grad()[0] = 5.0;
  Adam adam;
  adam.step(ps.items());
  EXPECT_EQ(w.value()[0], 1.0);
}

TEST(Parameters, DuplicateNameThrows) {
  ParameterSet ps;
  ps.add("a", Tensor({1}));
  EXPECT_THROW(ps.add("a", Tensor({1})), ConfigError);
  EXPECT_EQ(ps.scalar_count(), 1u);
}

TEST(Serialize, TensorRoundTrip) {
  Rng rng(13);
  const Tensor t = random({2, 3, 4}, rng);
  std::vector<std::uint8_t> buf;
  write_tensor(buf, t);
  write_tensor(buf, Tensor({1}, {-0.0}));
  std::size_t off = 0;
  EXPECT_EQ(read_tensor(buf, off), t);
  const Tensor z = read_tensor(buf, off);
  EXPECT_TRUE(std::signbit(z[0]));
  EXPECT_EQ(off, buf.size());
}

TEST(Serialize, TruncationIsParseError) {
  std::vector<std::uint8_t> buf;
  write_tensor(buf, Tensor({4}, 1.0));
  buf.pop_back();
  std::size_t off = 0;
  EXPECT_THROW(read_tensor(buf, off), ParseError);
}
