#include "hvs5m/features.hpp"

#include <algorithm>
#include <cmath>

#include "hvs5m/random.hpp"

namespace hvs::features {

std::string to_string(BackboneKind kind) { return kind == BackboneKind::File ? "file" : "toy-conv"; }

BackboneKind parse_backbone_kind(const std::string& text) {
  if (text == "file") return BackboneKind::File;
  if (text == "toy-conv") return BackboneKind::ToyConv;
  throw InvalidArgumentError("unknown backbone kind '" + text + "' (expected file or toy-conv)");
}

ToyConvNet::ToyConvNet(std::size_t in_channels, std::size_t out_channels, std::uint64_t seed)
    : in_channels_(in_channels), out_channels_(out_channels) {
  if (in_channels == 0 || out_channels == 0) throw InvalidArgumentError("toy backbone channels must be positive");
  Rng rng(seed);
  std::size_t in = in_channels;
  for (std::size_t s = 0; s < kStages; ++s) {
    const std::size_t out = s + 1 < kStages ? kHiddenWidths[s] : out_channels;
    Stage stage;
    stage.in = in;
    stage.out = out;
    stage.weight.resize(9 * in * out);
    stage.bias.assign(out, 0.0f);
    const double bound = std::sqrt(6.0 / static_cast<double>(9 * in));
    for (float& w : stage.weight) w = static_cast<float>(uniform_symmetric(rng, bound));
    stages_.push_back(std::move(stage));
    in = out;
  }
}

void ToyConvNet::set_bias(std::size_t stage, float value) {
  auto& b = stages_.at(stage).bias;
  std::fill(b.begin(), b.end(), value);
}

TensorF conv3x3_s2_relu(const TensorF& input, const ToyConvNet::Stage& stage, float input_scale) {
  if (input.rank() != 3 || input.dim(2) != stage.in)
    throw DimensionError("conv stage expects (H, W, " + std::to_string(stage.in) + "), got " +
                         shape_to_string(input.shape()));
  const std::size_t h = input.dim(0), w = input.dim(1), cin = stage.in, cout = stage.out;
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  std::vector<float> out(oh * ow * cout);
  std::vector<float> acc(cout);
  auto in = input.data();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      std::copy(stage.bias.begin(), stage.bias.end(), acc.begin());
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(2 * oy + ky) - 1;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(2 * ox + kx) - 1;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const float* px = in.data() + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
          const float* wk = stage.weight.data() + (ky * 3 + kx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const float a = px[ci] * input_scale;
            if (a == 0.0f) continue;
            const float* wr = wk + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) acc[co] += a * wr[co];
          }
        }
      }
      float* dst = out.data() + (oy * ow + ox) * cout;
      for (std::size_t co = 0; co < cout; ++co) dst[co] = acc[co] > 0.0f ? acc[co] : 0.0f;
    }
  }
  return TensorF({oh, ow, cout}, std::move(out));
}

TensorF ToyConvNet::forward(const TensorF& input) const {
  TensorF x = conv3x3_s2_relu(input, stages_[0], kInputScale);
  for (std::size_t s = 1; s < stages_.size(); ++s) x = conv3x3_s2_relu(x, stages_[s]);
  return x;
}

SpatialBackbone::SpatialBackbone(BackboneSpec spec, std::size_t in_channels) : spec_(spec) {
  if (spec_.channels_out == 0) throw InvalidArgumentError("backbone channels_out must be positive");
  if (spec_.kind == BackboneKind::ToyConv) {
    if (spec_.stride != 32) throw InvalidArgumentError("toy-conv backbone has a fixed stride of 32");
    net_.emplace(in_channels, spec_.channels_out, spec_.seed);
  }
}

Shape SpatialBackbone::output_shape(std::size_t height, std::size_t width) const {
  return {(height + spec_.stride - 1) / spec_.stride, (width + spec_.stride - 1) / spec_.stride, spec_.channels_out};
}

TensorF SpatialBackbone::run(const TensorF& image) const {
  if (!net_) throw InvalidArgumentError("file backbone cannot run on images; load the stored features instead");
  return net_->forward(image);
}

TensorF SpatialBackbone::validate_stored(const TensorF& stored, std::optional<Shape> expected) const {
  const bool ok = expected ? stored.shape() == *expected
                           : stored.rank() == 3 && stored.dim(2) == spec_.channels_out;
  if (!ok) {
    const std::string want =
        expected ? shape_to_string(*expected) : "(H', W', " + std::to_string(spec_.channels_out) + ")";
    throw DimensionError("stored feature map: expected " + want + ", found " + shape_to_string(stored.shape()));
  }
  require_finite(stored, "stored feature map");
  return stored;
}

TensorF backbone_spatial(const TensorF& input, const SpatialBackbone& backbone) {
  return backbone.spec().kind == BackboneKind::File ? backbone.validate_stored(input) : backbone.run(input);
}

MotionBackbone::MotionBackbone(BackboneSpec spec) : spec_(spec) {
  if (spec_.channels_out == 0) throw InvalidArgumentError("backbone channels_out must be positive");
  if (spec_.kind == BackboneKind::ToyConv) {
    if (spec_.stride != 32) throw InvalidArgumentError("toy-conv backbone has a fixed stride of 32");
    net_.emplace(3, spec_.channels_out, spec_.seed);
  }
}

TensorF MotionBackbone::run(std::span<const TensorF> clip) const {
  if (!net_) throw InvalidArgumentError("file motion backbone cannot run on frames; load the stored features instead");
  if (clip.size() < 2) throw InputTooSmallError("motion needs a clip of at least 2 frames, got " + std::to_string(clip.size()));
  const std::size_t steps = clip.size() / 2;
  std::vector<TensorF> maps;
  maps.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const TensorF& a = clip[2 * k];
    const TensorF& b = clip[2 * k + 1];
    if (a.shape() != b.shape())
      throw DimensionError("clip frames differ in shape: " + shape_to_string(a.shape()) + " vs " +
                           shape_to_string(b.shape()));
    TensorF diff(a.shape());
    auto d = diff.data();
    auto pa = a.data(), pb = b.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = pb[i] - pa[i];
    TensorF m = net_->forward(diff);
    Shape s = m.shape();
    s.insert(s.begin(), 1);
    maps.push_back(m.reshaped(s));
  }
  return concat<float>(std::span<const TensorF>(maps), 0);
}

TensorF MotionBackbone::validate_stored(const TensorF& stored, std::size_t frames) const {
  if (frames < 2) throw InputTooSmallError("motion needs a clip of at least 2 frames, got " + std::to_string(frames));
  if (stored.rank() != 4 || stored.dim(0) != frames / 2 || stored.dim(3) != spec_.channels_out) {
    throw DimensionError("stored motion map: expected (" + std::to_string(frames / 2) + ", H', W', " +
                         std::to_string(spec_.channels_out) + "), found " + shape_to_string(stored.shape()));
  }
  require_finite(stored, "stored motion map");
  return stored;
}

TensorF backbone_motion(std::span<const TensorF> clip, const MotionBackbone& backbone) { return backbone.run(clip); }

TensorF attended_statistics(const TensorF& map, const TensorF* mask) {
  const TensorF weighted = mask ? channel_attention_multiply(map, *mask) : map;
  return concat({global_pool_mean(weighted), global_pool_std(weighted)}, 0);
}

TensorF spatial_statistics(const TensorF& content_map, const TensorF& edge_map, const TensorF& adjusted_saliency) {
  return concat({attended_statistics(content_map, &adjusted_saliency), attended_statistics(edge_map, &adjusted_saliency)},
                0);
}

TensorF spatial_statistics(const TensorF& frame, const TensorF& edge_image, const TensorF& adjusted_saliency,
                           const SpatialBackbone& content, const SpatialBackbone& edge) {
  return spatial_statistics(backbone_spatial(frame, content), backbone_spatial(edge_image, edge), adjusted_saliency);
}

TensorF temporal_statistics(const TensorF& motion) {
  if (motion.rank() != 4)
    throw DimensionError("motion maps must be (T, H', W', C), got " + shape_to_string(motion.shape()));
  return concat({global_pool_mean(motion), global_pool_std(motion)}, 1);
}

TensorF temporal_statistics(std::span<const TensorF> clip, const MotionBackbone& backbone) {
  return temporal_statistics(backbone_motion(clip, backbone));
}

TensorF fuse(std::span<const TensorF> spatial, const TensorF* temporal) {
  const std::size_t n = spatial.size();
  const std::size_t steps = n / 2;
  if (steps == 0) throw InputTooSmallError("fusion needs at least 2 frames, got " + std::to_string(n));
  if (temporal && (temporal->rank() != 2 || temporal->dim(0) != steps)) {
    throw DimensionError("fusion: " + std::to_string(steps) + " sampled spatial rows from " + std::to_string(n) +
                         " frames but temporal features are " + shape_to_string(temporal->shape()));
  }
  const std::size_t width = spatial.front().size();
  std::vector<TensorF> rows;
  rows.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const TensorF& s = spatial[2 * k];
    if (s.rank() != 1 || s.size() != width)
      throw DimensionError("spatial feature " + std::to_string(2 * k) + " has shape " + shape_to_string(s.shape()) +
                           ", expected (" + std::to_string(width) + ")");
    rows.push_back(s.reshaped({1, width}));
  }
  TensorF sampled = concat<float>(std::span<const TensorF>(rows), 0);
  if (!temporal) return sampled;
  return concat({sampled, *temporal}, 1);
}

}  // namespace hvs::features
