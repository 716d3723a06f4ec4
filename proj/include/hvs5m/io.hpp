#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hvs5m/head.hpp"
#include "hvs5m/tensor.hpp"

namespace hvs::io {

namespace fs = std::filesystem;

// HVSF byte layout, all integers little-endian, no padding:
//   offset 0        4 bytes   magic "HVSF"
//   offset 4        u16       version (1)
//   offset 6        u8        dtype: 1 = f32, 2 = f64, 3 = u8
//   offset 7        u8        ndim
//   offset 8        ndim x u64 dims
//   offset 8+8*ndim payload, row-major, little-endian IEEE-754 for floats
inline constexpr char kMagic[4] = {'H', 'V', 'S', 'F'};
inline constexpr std::uint16_t kVersion = 1;

enum class DType : std::uint8_t { F32 = 1, F64 = 2, U8 = 3 };

using AnyTensor = std::variant<TensorF, TensorD, TensorU8>;

DType dtype_of(const AnyTensor& t);
const Shape& shape_of(const AnyTensor& t);

std::vector<std::uint8_t> encode(const AnyTensor& t);
AnyTensor decode(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

// Atomic: writes a sibling temp file and renames it over `path`.
void write_tensor(const fs::path& path, const AnyTensor& t, bool fsync = false);
AnyTensor read_tensor(const fs::path& path);

// Reads any dtype and converts element-wise to T.
template <typename T>
Tensor<T> read_tensor_as(const fs::path& path);

template <typename T>
Tensor<T> convert(const AnyTensor& t) {
  return std::visit([](const auto& v) { return v.template cast<T>(); }, t);
}

void write_text_atomic(const fs::path& path, const std::string& text);

// One video of a dataset manifest. Paths are absolute after loading.
struct VideoRecord {
  std::string id;
  std::size_t line = 0;
  std::optional<fs::path> frames_dir;  // per-frame HVSF files (H, W, 3), lexicographic order
  std::optional<fs::path> raw_video;   // N packed or planar RGB frames of H x W
  std::string raw_format = "rgb24";    // rgb24 (packed) or rgbp (planar per frame)
  std::size_t height = 0, width = 0, num_frames = 0;
  double mos = 0.0;
  double mos_low = 0.0, mos_high = 0.0;
  std::optional<fs::path> saliency, content, edgefeat, motion;
};

struct DatasetManifest {
  fs::path path;
  std::vector<VideoRecord> videos;

  const VideoRecord& find(const std::string& id) const;
};

// Grammar (one "key: value" per line, '#' starts a comment):
//   mos_range: <low> <high>          header default, also allowed per video
//   video: <id>                      starts a record
//   frames: <dir> | raw: <file>      optional frame source
//   raw_format / height / width / num_frames   required with raw
//   mos: <real>                      required
//   saliency / content / edgefeat / motion: <file>   optional feature files
// Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const fs::path& path);
DatasetManifest parse_manifest(const std::string& text, const fs::path& origin);

std::vector<TensorF> load_frames(const VideoRecord& video);
std::vector<fs::path> list_tensor_files(const fs::path& dir);

// Checkpoint directory: checkpoint.txt plus one HVSF file per tensor.
struct Checkpoint {
  head::HeadParams<float> params;
  head::TempHystConfig temphyst;
  head::Pooling pooling = head::Pooling::TempHyst;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::vector<float> input_mean;   // empty when no standardisation
  std::vector<float> input_scale;
  std::string config_text;
};

void write_checkpoint(const fs::path& dir, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const fs::path& dir);

}  // namespace hvs::io
