#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hvs5m/tensor.hpp"

namespace hvs::features {

enum class BackboneKind { File, ToyConv };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(const std::string& text);

struct BackboneSpec {
  BackboneKind kind = BackboneKind::ToyConv;
  std::size_t channels_out = 2048;
  std::size_t stride = 32;
  std::uint64_t seed = 1;
};

inline constexpr std::size_t kContentChannels = 2048;
inline constexpr std::size_t kEdgeChannels = 2048;
inline constexpr std::size_t kMotionChannels = 256;

// Deterministic stand-in backbone: five 3x3 stride-2 zero-padded convolutions
// with bias and ReLU, widths 16-32-64-128-out. Weights are He-uniform from a
// seeded mt19937_64, biases start at zero, and the input is scaled by 1/255.
// Output spatial size is ceil(H/32) x ceil(W/32).
class ToyConvNet {
 public:
  static constexpr std::array<std::size_t, 4> kHiddenWidths{16, 32, 64, 128};
  static constexpr std::size_t kStages = 5;
  static constexpr float kInputScale = 1.0f / 255.0f;

  ToyConvNet(std::size_t in_channels, std::size_t out_channels, std::uint64_t seed);

  TensorF forward(const TensorF& input) const;

  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t out_channels() const noexcept { return out_channels_; }

  struct Stage {
    std::size_t in = 0, out = 0;
    std::vector<float> weight;  // [ky][kx][in][out]
    std::vector<float> bias;    // [out]
  };
  std::span<const Stage> stages() const noexcept { return stages_; }
  void set_bias(std::size_t stage, float value);

 private:
  std::size_t in_channels_, out_channels_;
  std::vector<Stage> stages_;
};

// One 3x3 stride-2 pad-1 convolution + bias + ReLU on a channel-last map.
TensorF conv3x3_s2_relu(const TensorF& input, const ToyConvNet::Stage& stage, float input_scale = 1.0f);

// Spatial feature extractor behind one contract for both kinds. For toy-conv
// the network runs on the image; for file the input is the stored feature map,
// which is checked and returned unchanged.
class SpatialBackbone {
 public:
  SpatialBackbone(BackboneSpec spec, std::size_t in_channels);

  const BackboneSpec& spec() const noexcept { return spec_; }
  Shape output_shape(std::size_t height, std::size_t width) const;

  TensorF run(const TensorF& image) const;
  TensorF validate_stored(const TensorF& stored, std::optional<Shape> expected = std::nullopt) const;

 private:
  BackboneSpec spec_;
  std::optional<ToyConvNet> net_;
};

// features = backbone(input) for either kind.
TensorF backbone_spatial(const TensorF& input, const SpatialBackbone& backbone);

// Clip-level extractor. The toy kind runs a ToyConvNet on the pair
// differences frame[2k+1] - frame[2k]; an odd trailing frame is dropped.
class MotionBackbone {
 public:
  explicit MotionBackbone(BackboneSpec spec);

  const BackboneSpec& spec() const noexcept { return spec_; }
  TensorF run(std::span<const TensorF> clip) const;
  TensorF validate_stored(const TensorF& stored, std::size_t frames) const;

 private:
  BackboneSpec spec_;
  std::optional<ToyConvNet> net_;
};

// (N/2, H/32, W/32, C) motion maps of a clip of N >= 2 frames.
TensorF backbone_motion(std::span<const TensorF> clip, const MotionBackbone& backbone);

// concat(GP_mean(x), GP_std(x)) with x = map, or map * mask when a mask is given.
TensorF attended_statistics(const TensorF& map, const TensorF* mask);

// S_n = concat(C_mean, C_std, E_mean, E_std) of the saliency-weighted maps.
TensorF spatial_statistics(const TensorF& content_map, const TensorF& edge_map, const TensorF& adjusted_saliency);

// Same, running both backbones on the frame and its edge map first.
TensorF spatial_statistics(const TensorF& frame, const TensorF& edge_image, const TensorF& adjusted_saliency,
                           const SpatialBackbone& content, const SpatialBackbone& edge);

// T = concat(M_mean, M_std) per step: (T, h, w, C) -> (T, 2C).
TensorF temporal_statistics(const TensorF& motion);
TensorF temporal_statistics(std::span<const TensorF> clip, const MotionBackbone& backbone);

// Keeps spatial rows 0, 2, 4, ... truncated to floor(N/2) and appends the
// temporal row of the same step. Without temporal features only the sampled
// spatial rows remain.
TensorF fuse(std::span<const TensorF> spatial, const TensorF* temporal);

}  // namespace hvs::features
