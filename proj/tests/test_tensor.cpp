#include <gtest/gtest.h>

#include <random>

#include "hvs5m/tensor.hpp"

using namespace hvs;

TEST(Tensor, RejectsZeroDimensionAndBadLength) {
  EXPECT_THROW(TensorF({2, 0, 3}), DimensionError);
  EXPECT_THROW(TensorF({2, 2}, std::vector<float>(3)), DimensionError);
}

TEST(Tensor, IndexingIsRowMajor) {
  TensorF t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  EXPECT_EQ(t(1, 2, 3), 23.0f);
  EXPECT_EQ(t(0, 1, 0), 4.0f);
  EXPECT_EQ(t.reshaped({6, 4})(5, 3), 23.0f);
  EXPECT_THROW(t.reshaped({5, 5}), DimensionError);
}

TEST(Tensor, ShapeToString) { EXPECT_EQ(shape_to_string({7, 7, 2048}), "(7, 7, 2048)"); }

TEST(Attention, MultipliesEveryChannelByTheMask) {
  TensorF f({1, 2, 2}, {1, 2, 3, 4});
  TensorF m({1, 2, 1}, {10, 0.5});
  const TensorF out = channel_attention_multiply(f, m);
  EXPECT_EQ(out.storage(), (std::vector<float>{10, 20, 1.5, 2}));
}

TEST(Attention, MaskShapeMustMatchSpatially) {
  TensorF f({2, 2, 3});
  EXPECT_THROW(channel_attention_multiply(f, TensorF({2, 3, 1})), DimensionError);
  EXPECT_THROW(channel_attention_multiply(f, TensorF({2, 2, 3})), DimensionError);
}

TEST(Attention, UnitMaskIsIdentityAndMaskActsLinearly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  TensorD f({3, 4, 5}), m({3, 4, 1}), ones({3, 4, 1}, 1.0);
  for (auto& v : f.data()) v = u(rng);
  for (auto& v : m.data()) v = u(rng);
  EXPECT_EQ(channel_attention_multiply(f, ones), f);
  TensorD m2 = m;
  for (auto& v : m2.data()) v *= 3.0;
  const auto a = channel_attention_multiply(f, m), b = channel_attention_multiply(f, m2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 3.0 * a[i], 1e-12);
}

TEST(Pooling, HandExample) {
  // (2, 2, 2): channel 0 = 1, 2, 3, 4; channel 1 = 5, 5, 5, 5
  TensorD t({2, 2, 2}, {1, 5, 2, 5, 3, 5, 4, 5});
  const auto mean = global_pool_mean(t), sd = global_pool_std(t);
  EXPECT_EQ(mean.shape(), Shape{2});
  EXPECT_DOUBLE_EQ(mean[0], 2.5);
  EXPECT_DOUBLE_EQ(mean[1], 5.0);
  EXPECT_NEAR(sd[0], std::sqrt(1.25), 1e-15);  // population, not sample
  EXPECT_DOUBLE_EQ(sd[1], 0.0);
}

TEST(Pooling, KeepsLeadingAxes) {
  TensorF t({4, 3, 5, 6}, 1.0f);
  EXPECT_EQ(global_pool_mean(t).shape(), (Shape{4, 6}));
  EXPECT_EQ(global_pool_std(t).shape(), (Shape{4, 6}));
  EXPECT_THROW(global_pool_mean(TensorF({3, 3})), DimensionError);
}

TEST(Pooling, AffineEquivariance) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    TensorD t({5, 7, 3});
    for (auto& v : t.data()) v = g(rng);
    const double a = g(rng) * 3.0, b = g(rng) * 10.0;
    TensorD s = t;
    for (auto& v : s.data()) v = a * v + b;
    const auto m0 = global_pool_mean(t), m1 = global_pool_mean(s);
    const auto s0 = global_pool_std(t), s1 = global_pool_std(s);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(m1[c], a * m0[c] + b, 1e-9);
      EXPECT_NEAR(s1[c], std::abs(a) * s0[c], 1e-9);
      EXPECT_GE(s0[c], 0.0);
    }
  }
}

TEST(Pooling, StdOfLargeOffsetFloatDataStaysAccurate) {
  TensorF t({1, 4, 1}, {1e6f + 1, 1e6f - 1, 1e6f + 1, 1e6f - 1});
  EXPECT_NEAR(global_pool_std(t)[0], 1.0f, 1e-6f);
}

TEST(Concat, AlongEachAxis) {
  TensorF a({2, 2}, {1, 2, 3, 4}), b({2, 1}, {5, 6}), c({1, 2}, {7, 8});
  EXPECT_EQ(concat({a, b}, 1).storage(), (std::vector<float>{1, 2, 5, 3, 4, 6}));
  EXPECT_EQ(concat({a, c}, 0).storage(), (std::vector<float>{1, 2, 3, 4, 7, 8}));
  EXPECT_THROW(concat({a, b}, 0), DimensionError);
  EXPECT_THROW(concat({a, c}, 2), DimensionError);
}

TEST(Concat, WidthsAdd) {
  TensorF a({2048}), b({2048}), c({2048}), d({2048});
  EXPECT_EQ(concat({a, b, c, d}, 0).shape(), Shape{8192});
}

TEST(Tensor, CastAndFiniteness) {
  TensorF t({3}, {1.5f, -2.0f, 3.0f});
  EXPECT_EQ(t.cast<double>()[0], 1.5);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(require_finite(t, "t"), NumericError);
}
