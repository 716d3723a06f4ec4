#include "hvs5m/saliency.hpp"

#include <algorithm>
#include <cmath>

namespace hvs::saliency {

namespace {

void require_map(const TensorF& map, const char* op) {
  if (map.rank() != 3 || map.dim(2) != 1)
    throw DimensionError(std::string(op) + " expects an (H, W, 1) map, got " + shape_to_string(map.shape()));
}

void require_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 255.0))
    throw InvalidArgumentError("saliency threshold must lie in (0, 255), got " + std::to_string(threshold));
}

double adjust_unchecked(double raw, double threshold, Compare compare) {
  const double scaled = raw * 255.0;
  const double probe = compare == Compare::Scaled ? scaled : raw;
  return scaled + (probe < threshold ? kLowOffset : kHighOffset);
}

}  // namespace

double adjust_value(double raw, double threshold, Compare compare) {
  require_threshold(threshold);
  if (!(raw >= 0.0 && raw <= 1.0)) throw InvalidArgumentError("raw saliency value " + std::to_string(raw) + " outside [0, 1]");
  return adjust_unchecked(raw, threshold, compare);
}

TensorF adjust_values(const TensorF& raw, double threshold, Compare compare) {
  require_map(raw, "adjust_saliency");
  require_threshold(threshold);
  TensorF out(raw.shape());
  auto src = raw.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const float v = src[i];
    if (!(v >= 0.0f && v <= 1.0f))
      throw InvalidArgumentError("raw saliency value " + std::to_string(v) + " outside [0, 1]");
    dst[i] = static_cast<float>(adjust_unchecked(v, threshold, compare));
  }
  return out;
}

TensorF resize_area(const TensorF& map, std::size_t block) {
  require_map(map, "resize_area");
  const std::size_t h = map.dim(0), w = map.dim(1);
  const std::size_t oh = (h + block - 1) / block, ow = (w + block - 1) / block;
  TensorF out({oh, ow, 1});
  for (std::size_t oy = 0; oy < oh; ++oy) {
    const std::size_t y0 = oy * block, y1 = std::min(h, y0 + block);
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const std::size_t x0 = ox * block, x1 = std::min(w, x0 + block);
      double acc = 0.0;
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) acc += map(y, x, 0);
      out(oy, ox, 0) = static_cast<float>(acc / static_cast<double>((y1 - y0) * (x1 - x0)));
    }
  }
  return out;
}

TensorF resize_bilinear(const TensorF& map, std::size_t out_h, std::size_t out_w) {
  require_map(map, "resize_bilinear");
  const std::size_t h = map.dim(0), w = map.dim(1);
  TensorF out({out_h, out_w, 1});
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  auto sample = [&](double fy, double fx) {
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
    const auto y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
    const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double ty = fy - static_cast<double>(y0), tx = fx - static_cast<double>(x0);
    const double top = map(y0, x0, 0) * (1 - tx) + map(y0, x1, 0) * tx;
    const double bottom = map(y1, x0, 0) * (1 - tx) + map(y1, x1, 0) * tx;
    return top * (1 - ty) + bottom * ty;
  };
  for (std::size_t oy = 0; oy < out_h; ++oy)
    for (std::size_t ox = 0; ox < out_w; ++ox)
      out(oy, ox, 0) = static_cast<float>(sample((oy + 0.5) * sy - 0.5, (ox + 0.5) * sx - 0.5));
  return out;
}

TensorF adjust_saliency(const TensorF& raw, const AdjustOptions& options) {
  require_map(raw, "adjust_saliency");
  const std::size_t h = raw.dim(0), w = raw.dim(1);
  if (h < options.stride || w < options.stride) {
    throw InputTooSmallError("saliency map " + shape_to_string(raw.shape()) + " smaller than stride " +
                             std::to_string(options.stride));
  }
  const TensorF adjusted = adjust_values(raw, options.threshold, options.compare);
  const std::size_t grid_h = (h + options.stride - 1) / options.stride;
  const std::size_t grid_w = (w + options.stride - 1) / options.stride;
  const std::size_t th = options.target_height.value_or(grid_h);
  const std::size_t tw = options.target_width.value_or(grid_w);
  if (options.resize == Resize::Bilinear) return resize_bilinear(adjusted, th, tw);
  if (th != grid_h || tw != grid_w) {
    throw DimensionError("area resize of " + shape_to_string(raw.shape()) + " yields (" + std::to_string(grid_h) +
                         ", " + std::to_string(grid_w) + ") but features are (" + std::to_string(th) + ", " +
                         std::to_string(tw) + "); use bilinear resize");
  }
  return resize_area(adjusted, options.stride);
}

TensorF toy_saliency(const TensorF& frame) {
  if (frame.rank() != 3 || frame.dim(2) != 3)
    throw DimensionError("toy_saliency expects an (H, W, 3) frame, got " + shape_to_string(frame.shape()));
  const std::size_t h = frame.dim(0), w = frame.dim(1);
  if (h < 32 || w < 32) throw InputTooSmallError("toy_saliency needs H, W >= 32, got " + shape_to_string(frame.shape()));

  std::vector<double> luma(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      luma[y * w + x] = 0.299 * frame(y, x, 0) + 0.587 * frame(y, x, 1) + 0.114 * frame(y, x, 2);

  // Separable box blur with replicated borders.
  const auto r = static_cast<std::ptrdiff_t>(kToyBlurRadius);
  const double norm = 1.0 / static_cast<double>(2 * r + 1);
  auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  std::vector<double> tmp(h * w), blur(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d) acc += luma[y * w + clampi(static_cast<std::ptrdiff_t>(x) + d, w)];
      tmp[y * w + x] = acc * norm;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d) acc += tmp[clampi(static_cast<std::ptrdiff_t>(y) + d, h) * w + x];
      blur[y * w + x] = acc * norm;
    }

  std::vector<double> contrast(h * w);
  for (std::size_t i = 0; i < contrast.size(); ++i) contrast[i] = std::abs(luma[i] - blur[i]);
  const auto [lo, hi] = std::minmax_element(contrast.begin(), contrast.end());
  const double span = *hi - *lo;
  TensorF out({h, w, 1});
  if (span <= 1e-9) return out;
  const double low = *lo;
  auto dst = out.data();
  for (std::size_t i = 0; i < contrast.size(); ++i)
    dst[i] = static_cast<float>(std::clamp((contrast[i] - low) / span, 0.0, 1.0));
  return out;
}

}  // namespace hvs::saliency
