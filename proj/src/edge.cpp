#include "hvs5m/edge.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

namespace hvs::edge {

void CannyParams::validate() const {
  if (!(lower > 0.0 && lower < upper))
    throw InvalidArgumentError("canny thresholds need 0 < lower < upper, got lower=" + std::to_string(lower) +
                               " upper=" + std::to_string(upper));
  if (!(sigma > 0.0)) throw InvalidArgumentError("canny sigma must be positive");
  if (kernel < 3 || kernel % 2 == 0) throw InvalidArgumentError("canny kernel must be odd and >= 3");
}

std::vector<double> gaussian_kernel(double sigma, std::size_t size) {
  const auto r = static_cast<std::ptrdiff_t>(size / 2);
  std::vector<double> k(size * size);
  double sum = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i)
    for (std::ptrdiff_t j = -r; j <= r; ++j) {
      const double v = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>((i + r) * static_cast<std::ptrdiff_t>(size) + (j + r))] = v;
      sum += v;
    }
  for (double& v : k) v /= sum;
  return k;
}

namespace {

inline std::size_t clamp_index(std::ptrdiff_t v, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

// 2-D correlation with replicated borders, accumulated row-major over the kernel.
std::vector<double> correlate(const std::vector<double>& img, std::size_t h, std::size_t w, const double* kernel,
                              std::size_t ksize) {
  const auto r = static_cast<std::ptrdiff_t>(ksize / 2);
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t ky = -r; ky <= r; ++ky) {
        const std::size_t sy = clamp_index(static_cast<std::ptrdiff_t>(y) + ky, h);
        for (std::ptrdiff_t kx = -r; kx <= r; ++kx) {
          const std::size_t sx = clamp_index(static_cast<std::ptrdiff_t>(x) + kx, w);
          acc += kernel[(ky + r) * static_cast<std::ptrdiff_t>(ksize) + (kx + r)] * img[sy * w + sx];
        }
      }
      out[y * w + x] = acc;
    }
  return out;
}

constexpr double kSobelX[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
constexpr double kSobelY[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

Direction quantize(double gx, double gy) {
  double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
  if (angle < 0.0) angle += 180.0;
  if (angle < 22.5 || angle >= 157.5) return Direction::Deg0;
  if (angle < 67.5) return Direction::Deg45;
  if (angle < 112.5) return Direction::Deg90;
  return Direction::Deg135;
}

// Unit step (dx, dy) along the gradient for each orientation; +y points down.
constexpr std::ptrdiff_t kStep[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};

}  // namespace

CannyStages canny_stages(const TensorF& channel, const CannyParams& params) {
  params.validate();
  if (channel.rank() != 3 || channel.dim(2) != 1)
    throw DimensionError("canny expects an (H, W, 1) channel, got " + shape_to_string(channel.shape()));
  const std::size_t h = channel.dim(0), w = channel.dim(1);
  if (h < params.kernel || w < params.kernel)
    throw InputTooSmallError("image " + shape_to_string(channel.shape()) + " smaller than the " +
                             std::to_string(params.kernel) + "x" + std::to_string(params.kernel) + " blur kernel");

  CannyStages s;
  s.height = h;
  s.width = w;
  std::vector<double> img(h * w);
  auto src = channel.data();
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!(src[i] >= 0.0f && src[i] <= 255.0f))
      throw InvalidArgumentError("canny input value " + std::to_string(src[i]) + " outside [0, 255]");
    img[i] = src[i];
  }

  const auto kernel = gaussian_kernel(params.sigma, params.kernel);
  s.blurred = correlate(img, h, w, kernel.data(), params.kernel);
  s.gx = correlate(s.blurred, h, w, kSobelX, 3);
  s.gy = correlate(s.blurred, h, w, kSobelY, 3);

  s.magnitude.resize(h * w);
  s.direction.resize(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    s.magnitude[i] = std::sqrt(s.gx[i] * s.gx[i] + s.gy[i] * s.gy[i]);
    s.direction[i] = quantize(s.gx[i], s.gy[i]);
  }

  // A pixel survives if strictly above its neighbour against the gradient and
  // at least equal to the one along it; this keeps one pixel of a flat ridge.
  auto mag_at = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) return 0.0;
    return s.magnitude[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  s.nms.assign(h * w, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const double m = s.magnitude[i];
      if (m <= 0.0) continue;
      const auto& d = kStep[static_cast<int>(s.direction[i])];
      const auto yy = static_cast<std::ptrdiff_t>(y), xx = static_cast<std::ptrdiff_t>(x);
      if (m > mag_at(yy - d[1], xx - d[0]) && m >= mag_at(yy + d[1], xx + d[0])) s.nms[i] = 1;
    }

  s.edges.assign(h * w, 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < h * w; ++i) {
    if (s.nms[i] && s.magnitude[i] >= params.upper) {
      s.edges[i] = 255;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const auto y = static_cast<std::ptrdiff_t>(i / w), x = static_cast<std::ptrdiff_t>(i % w);
    for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
      for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
        const std::ptrdiff_t ny = y + dy, nx = x + dx;
        if ((dy == 0 && dx == 0) || ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) ||
            nx >= static_cast<std::ptrdiff_t>(w))
          continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
        if (s.edges[j] || !s.nms[j] || s.magnitude[j] < params.lower) continue;
        s.edges[j] = 255;
        queue.push_back(j);
      }
  }
  return s;
}

TensorU8 canny_channel(const TensorF& channel, const CannyParams& params) {
  CannyStages s = canny_stages(channel, params);
  return TensorU8({s.height, s.width, 1}, std::move(s.edges));
}

TensorF extract_channel(const TensorF& image, std::size_t c) {
  if (image.rank() != 3 || c >= image.dim(2))
    throw DimensionError("cannot take channel " + std::to_string(c) + " of " + shape_to_string(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1), channels = image.dim(2);
  TensorF out({h, w, 1});
  auto src = image.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < h * w; ++p) dst[p] = src[p * channels + c];
  return out;
}

TensorU8 edge_maps(const TensorF& frame, const CannyParams& params) {
  if (frame.rank() != 3 || frame.dim(2) != 3)
    throw DimensionError("edge_maps expects an (H, W, 3) frame, got " + shape_to_string(frame.shape()));
  std::vector<TensorU8> channels;
  channels.reserve(3);
  for (std::size_t c = 0; c < 3; ++c) channels.push_back(canny_channel(extract_channel(frame, c), params));
  return concat<std::uint8_t>(std::span<const TensorU8>(channels), 2);
}

}  // namespace hvs::edge
