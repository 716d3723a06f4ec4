#pragma once

#include <cstdint>
#include <vector>

#include "hvs5m/tensor.hpp"

namespace hvs::edge {

struct CannyParams {
  double upper = 140.0;  // strong edge: magnitude >= upper
  double lower = 5.0;    // weak edge: lower <= magnitude < upper
  double sigma = 1.4;
  std::size_t kernel = 5;  // odd Gaussian support

  void validate() const;
};

// Gradient direction quantised to the four NMS orientations, in degrees.
enum class Direction : std::uint8_t { Deg0 = 0, Deg45 = 1, Deg90 = 2, Deg135 = 3 };

// Every intermediate of one Canny pass, row-major (H, W).
struct CannyStages {
  std::size_t height = 0, width = 0;
  std::vector<double> blurred, gx, gy, magnitude;
  std::vector<Direction> direction;
  std::vector<std::uint8_t> nms;    // 1 where the pixel survives non-maximum suppression
  std::vector<std::uint8_t> edges;  // 0 or 255 after hysteresis
};

std::vector<double> gaussian_kernel(double sigma, std::size_t size);

CannyStages canny_stages(const TensorF& channel, const CannyParams& params);

// Binary (H, W, 1) edge map of a single (H, W, 1) channel with values in [0, 255].
TensorU8 canny_channel(const TensorF& channel, const CannyParams& params = {});

// Per-channel Canny over an (H, W, 3) frame, concatenated R, G, B on the
// channel axis. Every value is 0 or 255.
TensorU8 edge_maps(const TensorF& frame, const CannyParams& params = {});

// (H, W, C) -> (H, W, 1) copy of channel c.
TensorF extract_channel(const TensorF& image, std::size_t c);

}  // namespace hvs::edge
