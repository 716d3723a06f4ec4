#include "hvs5m/tensor.hpp"

#include <sstream>

namespace hvs {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {

struct PoolLayout {
  std::size_t outer;    // product of leading axes
  std::size_t spatial;  // H * W
  std::size_t channels;
  Shape out_shape;
};

template <typename T>
PoolLayout pool_layout(const Tensor<T>& t, const char* op) {
  if (t.rank() < 3)
    throw DimensionError(std::string(op) + " needs rank >= 3, got " + shape_to_string(t.shape()));
  const std::size_t r = t.rank();
  PoolLayout l;
  l.channels = t.dim(r - 1);
  l.spatial = t.dim(r - 2) * t.dim(r - 3);
  l.outer = 1;
  for (std::size_t a = 0; a + 3 < r; ++a) {
    l.outer *= t.dim(a);
    l.out_shape.push_back(t.dim(a));
  }
  l.out_shape.push_back(l.channels);
  if (l.spatial == 0) throw DimensionError(std::string(op) + ": empty spatial extent");
  return l;
}

}  // namespace

template <typename T>
Tensor<T> channel_attention_multiply(const Tensor<T>& features, const Tensor<T>& mask) {
  const auto& fs = features.shape();
  const auto& ms = mask.shape();
  bool ok = fs.size() >= 3 && ms.size() == fs.size() && ms.back() == 1;
  for (std::size_t a = 0; ok && a + 1 < fs.size(); ++a) ok = fs[a] == ms[a];
  if (!ok) {
    throw DimensionError("attention mask shape " + shape_to_string(ms) +
                         " does not match feature shape " + shape_to_string(fs));
  }
  const std::size_t channels = fs.back();
  const std::size_t positions = mask.size();
  std::vector<T> out(features.size());
  auto f = features.data();
  auto m = mask.data();
  for (std::size_t p = 0; p < positions; ++p) {
    const T w = m[p];
    for (std::size_t c = 0; c < channels; ++c) out[p * channels + c] = f[p * channels + c] * w;
  }
  Tensor<T> result(fs, std::move(out));
  require_finite(result, "channel_attention_multiply");
  return result;
}

template <typename T>
Tensor<T> global_pool_mean(const Tensor<T>& features) {
  const PoolLayout l = pool_layout(features, "global_pool_mean");
  std::vector<T> out(l.outer * l.channels);
  auto f = features.data();
  std::vector<double> acc(l.channels);
  for (std::size_t o = 0; o < l.outer; ++o) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const T* base = f.data() + o * l.spatial * l.channels;
    for (std::size_t p = 0; p < l.spatial; ++p)
      for (std::size_t c = 0; c < l.channels; ++c) acc[c] += base[p * l.channels + c];
    for (std::size_t c = 0; c < l.channels; ++c)
      out[o * l.channels + c] = static_cast<T>(acc[c] / static_cast<double>(l.spatial));
  }
  return Tensor<T>(l.out_shape, std::move(out));
}

template <typename T>
Tensor<T> global_pool_std(const Tensor<T>& features) {
  const PoolLayout l = pool_layout(features, "global_pool_std");
  std::vector<T> out(l.outer * l.channels);
  auto f = features.data();
  std::vector<double> mean(l.channels), var(l.channels);
  const double n = static_cast<double>(l.spatial);
  for (std::size_t o = 0; o < l.outer; ++o) {
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    const T* base = f.data() + o * l.spatial * l.channels;
    for (std::size_t p = 0; p < l.spatial; ++p)
      for (std::size_t c = 0; c < l.channels; ++c) mean[c] += base[p * l.channels + c];
    for (std::size_t c = 0; c < l.channels; ++c) mean[c] /= n;
    // Two-pass form: exact zero for constant slices.
    for (std::size_t p = 0; p < l.spatial; ++p) {
      for (std::size_t c = 0; c < l.channels; ++c) {
        const double d = base[p * l.channels + c] - mean[c];
        var[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < l.channels; ++c)
      out[o * l.channels + c] = static_cast<T>(std::sqrt(var[c] / n));
  }
  return Tensor<T>(l.out_shape, std::move(out));
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size())
    throw DimensionError("concat axis " + std::to_string(axis) + " out of range for " + shape_to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t a = 0; ok && a < s.size(); ++a) ok = a == axis || s[a] == first[a];
    if (!ok) {
      throw DimensionError("concat on axis " + std::to_string(axis) + ": shape " + shape_to_string(s) +
                           " incompatible with " + shape_to_string(first));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= first[a];
  for (std::size_t a = axis + 1; a < first.size(); ++a) inner *= first[a];

  std::vector<T> out;
  out.reserve(shape_volume(out_shape));
  for (std::size_t o = 0; o < outer; ++o) {
    for (const auto& p : parts) {
      const std::size_t block = p.dim(axis) * inner;
      auto d = p.data().subspan(o * block, block);
      out.insert(out.end(), d.begin(), d.end());
    }
  }
  return Tensor<T>(std::move(out_shape), std::move(out));
}

#define HVS_INSTANTIATE(T)                                                              \
  template Tensor<T> channel_attention_multiply<T>(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> global_pool_mean<T>(const Tensor<T>&);                             \
  template Tensor<T> global_pool_std<T>(const Tensor<T>&);                              \
  template Tensor<T> concat<T>(std::span<const Tensor<T>>, std::size_t);

HVS_INSTANTIATE(float)
HVS_INSTANTIATE(double)
#undef HVS_INSTANTIATE

template Tensor<std::uint8_t> concat<std::uint8_t>(std::span<const Tensor<std::uint8_t>>, std::size_t);

}  // namespace hvs
