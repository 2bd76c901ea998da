#include "falldet/har/grad_suite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "falldet/har/model.hpp"
#include "falldet/nn/grad_check.hpp"
#include "falldet/nn/ops.hpp"
#include "falldet/rng.hpp"

namespace falldet::har {

using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

// Inputs stay clear of the relu kink so central differences never straddle it.
Var input(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) {
    double x = rng.uniform(lo, hi);
    if (std::abs(x) < 0.05) x += x < 0 ? -0.05 : 0.05;
    v = x;
  }
  return Var(std::move(t), true);
}

struct Case {
  std::string name;
  std::function<Var()> loss;
  std::vector<Var> inputs;
  double tolerance = kOpGradTolerance;
};

}  // namespace

std::vector<GradCaseResult> run_gradient_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Case> cases;
  std::vector<GradCaseResult> absolute_results;
  std::uint64_t proj = seed * 1000;
  auto projected = [&](std::string name, std::vector<Var> in, std::function<Var(const std::vector<Var>&)> f) {
    const std::uint64_t s = ++proj;
    cases.push_back({std::move(name), [in, f, s] { return nn::random_projection(f(in), s); }, in});
  };

  projected("add", {input({3, 4}, rng), input({3, 4}, rng)}, [](auto& v) { return nn::add(v[0], v[1]); });
  projected("add_broadcast", {input({2, 3, 4}, rng), input({4}, rng)}, [](auto& v) { return nn::add(v[0], v[1]); });
  projected("mul", {input({3, 4}, rng), input({3, 4}, rng)}, [](auto& v) { return nn::mul(v[0], v[1]); });
  projected("scale", {input({5}, rng)}, [](auto& v) { return nn::scale(v[0], -1.7); });
  projected("matmul", {input({2, 3, 4}, rng), input({4, 5}, rng)}, [](auto& v) { return nn::matmul(v[0], v[1]); });
  projected("matmul_t", {input({3, 4}, rng), input({5, 4}, rng)}, [](auto& v) { return nn::matmul(v[0], v[1], true); });
  projected("bmm", {input({2, 3, 4}, rng), input({2, 4, 3}, rng)}, [](auto& v) { return nn::bmm(v[0], v[1]); });
  projected("bmm_t", {input({2, 3, 4}, rng), input({2, 5, 4}, rng)}, [](auto& v) { return nn::bmm(v[0], v[1], true); });
  projected("linear", {input({2, 3, 4}, rng), input({5, 4}, rng), input({5}, rng)},
            [](auto& v) { return nn::linear(v[0], v[1], v[2]); });
  projected("reshape", {input({2, 6}, rng)}, [](auto& v) { return nn::reshape(v[0], {3, 4}); });
  projected("transpose", {input({2, 3, 4}, rng)}, [](auto& v) {
    const std::array<std::size_t, 3> perm{2, 0, 1};
    return nn::transpose(v[0], perm);
  });
  projected("relu", {input({4, 5}, rng)}, [](auto& v) { return nn::relu(v[0]); });
  projected("gelu", {input({4, 5}, rng, -3.0, 3.0)}, [](auto& v) { return nn::gelu(v[0]); });
  projected("softmax", {input({3, 6}, rng, -2.0, 2.0)}, [](auto& v) { return nn::softmax(v[0]); });
  projected("layer_norm", {input({3, 6}, rng, -2.0, 2.0), input({6}, rng), input({6}, rng)},
            [](auto& v) { return nn::layer_norm(v[0], v[1], v[2]); });
  projected("conv1d", {input({2, 3, 7}, rng), input({4, 3, 5}, rng), input({4}, rng)},
            [](auto& v) { return nn::conv1d(v[0], v[1], v[2]); });
  projected("mean_axis1", {input({2, 5, 3}, rng)}, [](auto& v) { return nn::mean(v[0], 1); });
  projected("sum", {input({3, 3}, rng)}, [](auto& v) { return nn::sum(v[0]); });
  projected("concat_last", {input({2, 3}, rng), input({2, 4}, rng)}, [](auto& v) { return nn::concat_last(v[0], v[1]); });
  projected("dropout", {input({4, 6}, rng)}, [](auto& v) {
    Rng mask(99);  // same mask on every evaluation
    return nn::dropout(v[0], 0.3, true, mask);
  });
  {
    std::vector<Var> in{input({4, 5}, rng, -2.0, 2.0)};
    cases.push_back({"cross_entropy",
                     [in] {
                       const std::array<int, 4> labels{0, 3, 4, 1};
                       return nn::cross_entropy(in[0], labels);
                     },
                     in});
  }
  {
    const std::size_t d = 8;
    std::vector<Var> in{input({2, 5, d}, rng)};
    for (int i = 0; i < 4; ++i) {
      in.push_back(input({d, d}, rng, -0.5, 0.5));
      in.push_back(input({d}, rng, -0.5, 0.5));
    }
    auto attention = [](const std::vector<Var>& v) {
      nn::AttentionParams p{v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
      return nn::multi_head_attention(v[0], 2, p);
    };
    // The key bias shifts every score of a query row by the same amount,
    // which softmax ignores: its true gradient is exactly zero and a
    // relative error against finite-difference noise means nothing.
    // Check it in absolute terms instead.
    const std::uint64_t s = ++proj;
    std::vector<Var> checked;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (i != 4) checked.push_back(in[i]);
    }
    cases.push_back({"multi_head_attention", [in, attention, s] { return nn::random_projection(attention(in), s); },
                     checked});
    {
      Var bk = in[4];
      for (auto& v : in) v.zero_grad();
      nn::random_projection(attention(in), s).backward();
      double worst = 0.0;
      for (double g : bk.grad().data()) worst = std::max(worst, std::abs(g));
      std::vector<Var> only{bk};
      const auto fd = nn::grad_check([in, attention, s] { return nn::random_projection(attention(in), s); }, only);
      worst = std::max({worst, std::abs(fd.worst_numeric), std::abs(fd.worst_analytic)});
      absolute_results.push_back({"attention_key_bias_zero", worst, 1e-9, true, bk.size(), worst < 1e-9});
    }
  }
  {
    ModelConfig cfg;
    cfg.input_time = 6;
    cfg.input_features = 4;
    cfg.n_classes = 3;
    cfg.embed_dim = 8;
    cfg.heads = 2;
    cfg.n_blocks = 1;
    cfg.conv_kernels = {3, 5};
    cfg.dropout = 0.0;
    cfg.rng_seed = seed;
    auto model = std::make_shared<HarModel>(cfg);
    std::vector<Var> in;
    for (auto& p : model->parameters().items()) in.push_back(p.var);
    const Var x = input({2, cfg.input_time, cfg.input_features}, rng);
    x.node()->requires_grad = false;
    cases.push_back({"tiny_classifier",
                     [model, x] {
                       const std::array<int, 2> labels{2, 0};
                       return nn::cross_entropy(model->forward(x), labels);
                     },
                     in, kModelGradTolerance});
  }

  std::vector<GradCaseResult> out;
  for (auto& c : cases) {
    const nn::GradCheckResult r = nn::grad_check(c.loss, c.inputs);
    out.push_back({c.name, r.max_rel_error, c.tolerance, false, r.coords_checked, r.max_rel_error < c.tolerance});
  }
  out.insert(out.end(), absolute_results.begin(), absolute_results.end());
  return out;
}

}  // namespace falldet::har
