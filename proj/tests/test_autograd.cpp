#include <functional>

#include "jefp/nn.hpp"
#include "jefp/ops.hpp"
#include "support.hpp"

namespace jefp {
namespace {

// Compares backward() against central differences for every entry of every
// input. The loss is <f(inputs), r> with a fixed random r.
void expect_gradients(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Var> inputs,
                      double tol = 1e-6) {
  Rng rng(99);
  Var probe = f(inputs);
  const Var r = Var::constant(probe.shape(), test::random_values(rng, probe.size()));
  auto loss = [&]() { return sum(mul(f(inputs), r)); };
  backward(loss());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> analytic(inputs[i].grad().begin(), inputs[i].grad().end());
    ASSERT_EQ(analytic.size(), inputs[i].size());
    auto data = inputs[i].mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double h = 1e-6, saved = data[j];
      data[j] = saved + h;
      const double up = loss().item();
      data[j] = saved - h;
      const double dn = loss().item();
      data[j] = saved;
      const double numeric = (up - dn) / (2 * h);
      EXPECT_NEAR(analytic[j], numeric, tol * std::max(1.0, std::abs(numeric)))
          << "input " << i << " entry " << j;
    }
  }
}

Var leaf(Rng& rng, Shape s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return Var::leaf(std::move(s), test::random_values(rng, n));
}

TEST(Autograd, ElementwiseOps) {
  Rng rng(1);
  expect_gradients([](const auto& v) { return mul(add(v[0], v[1]), sub(v[0], v[1])); },
                   {leaf(rng, {3, 4}), leaf(rng, {3, 4})});
  expect_gradients([](const auto& v) { return leaky_relu(scale(v[0], 1.7), 0.3); }, {leaf(rng, {10})});
}

TEST(Autograd, ReshapePermuteGather) {
  Rng rng(2);
  expect_gradients([](const auto& v) { return permute(v[0], {2, 0, 1}); }, {leaf(rng, {2, 3, 4})});
  expect_gradients([](const auto& v) { return gather_rows(v[0], {2, 0, 2, 1}); }, {leaf(rng, {3, 5})});
}

TEST(Autograd, Linear) {
  Rng rng(3);
  expect_gradients([](const auto& v) { return linear(v[0], v[1], v[2]); },
                   {leaf(rng, {4, 3}), leaf(rng, {3, 5}), leaf(rng, {5})});
}

TEST(Autograd, Conv2dStridedPadded) {
  Rng rng(4);
  ConvGeometry g{3, 2, 2, 1, 1, 0};
  expect_gradients([g](const auto& v) { return conv2d(v[0], v[1], v[2], g); },
                   {leaf(rng, {2, 3, 5, 4}), leaf(rng, {2, 3, 3, 2}), leaf(rng, {2})});
}

TEST(Autograd, ConvTranspose2d) {
  Rng rng(5);
  ConvGeometry g{4, 3, 2, 1, 1, 1};
  expect_gradients([g](const auto& v) { return conv_transpose2d(v[0], v[1], v[2], g); },
                   {leaf(rng, {2, 2, 3, 3}), leaf(rng, {2, 3, 4, 3}), leaf(rng, {3})});
}

TEST(Autograd, BatchNormTraining) {
  Rng rng(6);
  Buffer rm(3, 0.0), rv(3, 1.0);
  expect_gradients(
      [&](const auto& v) { return batch_norm(v[0], v[1], v[2], rm, rv, true); },
      {leaf(rng, {4, 3, 2, 2}), leaf(rng, {3}), leaf(rng, {3})}, 1e-5);
}

TEST(Autograd, BatchNormNormalizesBatch) {
  Rng rng(7);
  Buffer rm(2, 0.0), rv(2, 1.0);
  const Var x = leaf(rng, {8, 2, 3});
  const Var y = batch_norm(x, Var::constant({2}, 1.0), Var::constant({2}, 0.0), rm, rv, true);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, s = 0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t i = 0; i < 3; ++i) {
        const double v = y.data()[(n * 2 + c) * 3 + i];
        m += v;
        s += v * v;
      }
    EXPECT_NEAR(m / 24, 0.0, 1e-12);
    EXPECT_NEAR(s / 24, 1.0, 1e-3);
  }
  EXPECT_NE(rm[0], 0.0);
}

TEST(Autograd, GroupPowerNormalize) {
  Rng rng(8);
  expect_gradients([](const auto& v) { return group_power_normalize(v[0], 4, 2.0, "x"); },
                   {leaf(rng, {3, 4})});
  const Var y = group_power_normalize(leaf(rng, {2, 6}), 6, 3.0, "x");
  for (std::size_t g = 0; g < 2; ++g) {
    double p = 0;
    for (std::size_t i = 0; i < 6; ++i) p += y.data()[g * 6 + i] * y.data()[g * 6 + i];
    EXPECT_NEAR(p, 3.0, 1e-12);
  }
  EXPECT_THROW(group_power_normalize(Var::constant({4}, 0.0), 4, 1.0, "degenerate thing"),
               std::domain_error);
}

TEST(Autograd, SquaredErrorAndMean) {
  Rng rng(9);
  expect_gradients([](const auto& v) { return squared_error(v[0], v[1], 3.0); },
                   {leaf(rng, {2, 3}), leaf(rng, {2, 3})});
  expect_gradients([](const auto& v) { return mean(v[0]); }, {leaf(rng, {5})});
}

TEST(Autograd, NoGradGuardSkipsGraph) {
  Rng rng(10);
  const Var x = leaf(rng, {3});
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    const Var y = scale(x, 2.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Autograd, GradientsAccumulateAcrossUses) {
  const Var x = Var::leaf({1}, {3.0});
  backward(sum(mul(x, x)));  // d/dx x^2 = 6
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Nn, AdamMovesAgainstGradient) {
  Rng rng(11);
  Linear fc(2, 1, true, rng);
  Adam opt(fc.parameters(), {});
  const Var x = Var::constant({1, 2}, {1.0, -1.0});
  double before = sum(mul(fc.forward(x), fc.forward(x))).item();
  for (int i = 0; i < 50; ++i) {
    opt.zero_grad();
    const Var y = fc.forward(x);
    backward(sum(mul(y, y)));
    opt.step();
  }
  const Var y = fc.forward(x);
  EXPECT_LT(sum(mul(y, y)).item(), before);
  EXPECT_EQ(opt.steps(), 50u);
}

}  // namespace
}  // namespace jefp
