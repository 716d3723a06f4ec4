#include <gtest/gtest.h>

#include <random>

#include "hvs5m/features.hpp"
#include "support/images.hpp"

using namespace hvs;
using namespace hvs::features;

TEST(BackboneKind, ParseAndPrint) {
  EXPECT_EQ(parse_backbone_kind("file"), BackboneKind::File);
  EXPECT_EQ(parse_backbone_kind("toy-conv"), BackboneKind::ToyConv);
  EXPECT_EQ(to_string(BackboneKind::ToyConv), "toy-conv");
  EXPECT_THROW(parse_backbone_kind("resnet"), InvalidArgumentError);
}

TEST(ToyConv, StrideTwoPadOneHandCase) {
  ToyConvNet::Stage s;
  s.in = 1;
  s.out = 2;
  s.weight.assign(9 * 2, 0.0f);
  for (std::size_t k = 0; k < 9; ++k) {
    s.weight[k * 2 + 0] = 1.0f;
    s.weight[k * 2 + 1] = -1.0f;
  }
  s.bias = {0.5f, 0.0f};
  const TensorF out = conv3x3_s2_relu(TensorF({4, 4, 1}, 1.0f), s);
  ASSERT_EQ(out.shape(), (Shape{2, 2, 2}));
  // Window of output (0,0) covers input rows/cols -1..1, so 4 valid taps.
  EXPECT_FLOAT_EQ(out(0, 0, 0), 4.5f);
  EXPECT_FLOAT_EQ(out(0, 1, 0), 6.5f);
  EXPECT_FLOAT_EQ(out(1, 1, 0), 9.5f);
  EXPECT_FLOAT_EQ(out(1, 1, 1), 0.0f);  // ReLU
}

TEST(ToyConv, OddSizesRoundUp) {
  ToyConvNet net(3, 8, 1);
  EXPECT_EQ(net.forward(TensorF({33, 70, 3}, 10.0f)).shape(), (Shape{2, 3, 8}));
  EXPECT_EQ(net.forward(TensorF({224, 224, 3}, 10.0f)).shape(), (Shape{7, 7, 8}));
}

TEST(ToyConv, SeedDeterminism) {
  std::mt19937_64 rng(2);
  const TensorF img = testimg::random_frame(rng, 64, 64);
  ToyConvNet a(3, 16, 5), b(3, 16, 5), c(3, 16, 6);
  EXPECT_EQ(a.forward(img), b.forward(img));
  EXPECT_NE(a.forward(img), c.forward(img));
  const auto out = a.forward(img);
  for (float v : out.data()) EXPECT_GE(v, 0.0f);
}

TEST(ToyConv, StageWidths) {
  ToyConvNet net(3, 2048, 1);
  const auto st = net.stages();
  ASSERT_EQ(st.size(), 5u);
  const std::size_t widths[] = {16, 32, 64, 128, 2048};
  std::size_t in = 3;
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(st[i].in, in);
    EXPECT_EQ(st[i].out, widths[i]);
    EXPECT_EQ(st[i].weight.size(), 9 * in * widths[i]);
    const double bound = std::sqrt(6.0 / (9.0 * static_cast<double>(in))) * (1 + 1e-6);
    for (float w : st[i].weight) EXPECT_LE(std::abs(w), bound);
    in = widths[i];
  }
}

TEST(SpatialBackbone, ShapesAndStoredChecks) {
  SpatialBackbone toy({BackboneKind::ToyConv, 2048, 32, 1}, 3);
  EXPECT_EQ(toy.output_shape(224, 224), (Shape{7, 7, 2048}));
  SpatialBackbone file({BackboneKind::File, 2048, 32, 1}, 3);
  EXPECT_NO_THROW(file.validate_stored(TensorF({7, 7, 2048})));
  EXPECT_THROW(file.validate_stored(TensorF({7, 7, 1024})), DimensionError);
  EXPECT_THROW(file.validate_stored(TensorF({7, 7, 2048}), Shape{8, 8, 2048}), DimensionError);
  EXPECT_THROW(file.run(TensorF({64, 64, 3})), InvalidArgumentError);
  TensorF bad({2, 2, 2048});
  bad[3] = std::nanf("");
  EXPECT_THROW(file.validate_stored(bad), NumericError);
}

TEST(MotionBackbone, PairsFramesAndDropsOddTail) {
  MotionBackbone m({BackboneKind::ToyConv, 16, 32, 3});
  std::mt19937_64 rng(3);
  std::vector<TensorF> clip;
  for (int i = 0; i < 7; ++i) clip.push_back(testimg::random_frame(rng, 64, 64));
  EXPECT_EQ(m.run(clip).shape(), (Shape{3, 2, 2, 16}));
  EXPECT_THROW(m.run(std::span(clip).subspan(0, 1)), InputTooSmallError);
  // Identical frames move nothing: zero input, zero bias, zero output.
  std::vector<TensorF> still(4, clip[0]);
  const auto moved = m.run(still);
  for (float v : moved.data()) EXPECT_EQ(v, 0.0f);
}

TEST(MotionBackbone, StoredMustMatchHalfTheFrames) {
  MotionBackbone m({BackboneKind::File, 256, 32, 3});
  EXPECT_NO_THROW(m.validate_stored(TensorF({4, 7, 7, 256}), 8));
  EXPECT_NO_THROW(m.validate_stored(TensorF({4, 7, 7, 256}), 9));
  EXPECT_THROW(m.validate_stored(TensorF({3, 7, 7, 256}), 8), DimensionError);
  EXPECT_THROW(m.validate_stored(TensorF({4, 7, 7, 128}), 8), DimensionError);
}

TEST(Statistics, AttendedStatisticsHandCase) {
  TensorF map({1, 2, 1}, {2, 4});
  TensorF mask({1, 2, 1}, {1, 3});
  const TensorF s = attended_statistics(map, &mask);  // weighted values 2, 12
  ASSERT_EQ(s.shape(), Shape{2});
  EXPECT_FLOAT_EQ(s[0], 7.0f);
  EXPECT_FLOAT_EQ(s[1], 5.0f);
  const TensorF plain = attended_statistics(map, nullptr);
  EXPECT_FLOAT_EQ(plain[0], 3.0f);
  EXPECT_FLOAT_EQ(plain[1], 1.0f);
}

TEST(Statistics, SpatialOrderIsContentThenEdge) {
  TensorF c({2, 2, 3}, 1.0f), e({2, 2, 3}, 5.0f), sal({2, 2, 1}, 2.0f);
  const TensorF s = spatial_statistics(c, e, sal);
  ASSERT_EQ(s.shape(), Shape{12});
  for (int i = 0; i < 3; ++i) {
    EXPECT_FLOAT_EQ(s[i], 2.0f);
    EXPECT_FLOAT_EQ(s[3 + i], 0.0f);
    EXPECT_FLOAT_EQ(s[6 + i], 10.0f);
    EXPECT_FLOAT_EQ(s[9 + i], 0.0f);
  }
  EXPECT_THROW(spatial_statistics(c, TensorF({3, 3, 3}), sal), DimensionError);
}

TEST(Statistics, TemporalRowsPerStep) {
  TensorF m({3, 2, 2, 4}, 1.0f);
  EXPECT_EQ(temporal_statistics(m).shape(), (Shape{3, 8}));
  EXPECT_THROW(temporal_statistics(TensorF({2, 2, 4})), DimensionError);
}

TEST(Fuse, SamplesEvenFramesAndAppendsTemporal) {
  std::vector<TensorF> spatial;
  for (int n = 0; n < 5; ++n) spatial.push_back(TensorF({2}, static_cast<float>(n)));
  TensorF t({2, 1}, {10, 20});
  const TensorF f = fuse(spatial, &t);
  ASSERT_EQ(f.shape(), (Shape{2, 3}));
  EXPECT_EQ(f.storage(), (std::vector<float>{0, 0, 10, 2, 2, 20}));
  EXPECT_EQ(fuse(spatial, nullptr).shape(), (Shape{2, 2}));
  TensorF wrong({3, 1});
  EXPECT_THROW(fuse(spatial, &wrong), DimensionError);
  EXPECT_THROW(fuse(std::span(spatial).subspan(0, 1), nullptr), InputTooSmallError);
}

TEST(Fuse, FullWidths) {
  std::vector<TensorF> spatial(8, TensorF({8192}));
  TensorF t({4, 512});
  EXPECT_EQ(fuse(spatial, &t).shape(), (Shape{4, 8704}));
}
