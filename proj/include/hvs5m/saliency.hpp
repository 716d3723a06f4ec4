#pragma once

#include <cstddef>
#include <optional>

#include "hvs5m/tensor.hpp"

namespace hvs::saliency {

// How the threshold h is compared against a raw saliency value A in [0,1].
enum class Compare {
  Scaled,  // A * 255 < h   (default)
  Raw,     // A < h
};

enum class Resize {
  Area,      // mean over stride x stride blocks; edge blocks are partial
  Bilinear,  // half-pixel-centre bilinear to an arbitrary target
};

struct AdjustOptions {
  double threshold = 100.0;
  Compare compare = Compare::Scaled;
  Resize resize = Resize::Area;
  std::size_t stride = 32;
  // Target (H', W'); defaults to (ceil(H/stride), ceil(W/stride)).
  std::optional<std::size_t> target_height;
  std::optional<std::size_t> target_width;
};

inline constexpr double kLowOffset = 250.0;
inline constexpr double kHighOffset = 350.0;

// Piecewise adjustment of one raw value, before resizing.
double adjust_value(double raw, double threshold, Compare compare = Compare::Scaled);

// Elementwise adjustment of a (H, W, 1) map without resizing.
TensorF adjust_values(const TensorF& raw, double threshold, Compare compare = Compare::Scaled);

// Adjust then downsample a raw (H, W, 1) map with values in [0,1] to the
// feature-map grid. Requires H, W >= stride.
TensorF adjust_saliency(const TensorF& raw, const AdjustOptions& options = {});

TensorF resize_area(const TensorF& map, std::size_t block);
TensorF resize_bilinear(const TensorF& map, std::size_t out_h, std::size_t out_w);

inline constexpr std::size_t kToyBlurRadius = 8;

// Parameter-free stand-in saliency: |Y - box_blur(Y)| with Y the BT.601 luma
// and a (2r+1)^2 replicate-border box blur, min-max normalised to [0,1].
// Constant frames give an all-zero map.
TensorF toy_saliency(const TensorF& frame);

}  // namespace hvs::saliency
