#include "hvs5m/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace hvs::io {

namespace {

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::F32:
      return 4;
    case DType::F64:
      return 8;
    case DType::U8:
      return 1;
  }
  return 0;
}

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  std::uint8_t bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  out.insert(out.end(), bytes, bytes + sizeof(U));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  std::uint8_t bytes[sizeof(U)];
  std::memcpy(bytes, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  U value;
  std::memcpy(&value, bytes, sizeof(U));
  return value;
}

template <typename T>
void put_payload(std::vector<std::uint8_t>& out, const Tensor<T>& t) {
  if constexpr (std::is_same_v<T, std::uint8_t>) {
    out.insert(out.end(), t.data().begin(), t.data().end());
  } else {
    for (T v : t.data()) put_le(out, v);
  }
}

template <typename T>
Tensor<T> get_payload(const Shape& shape, const std::uint8_t* p) {
  std::vector<T> data(shape_volume(shape));
  if constexpr (std::is_same_v<T, std::uint8_t>) {
    std::memcpy(data.data(), p, data.size());
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_le<T>(p + i * sizeof(T));
  }
  return Tensor<T>(shape, std::move(data));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_bytes_atomic(const fs::path& path, const void* data, std::size_t size, bool do_fsync) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw IoError("cannot open " + tmp.string() + " for writing: " + std::strerror(errno));
  const bool ok = std::fwrite(data, 1, size, f) == size && std::fflush(f) == 0 && (!do_fsync || ::fsync(::fileno(f)) == 0);
  std::fclose(f);
  if (!ok) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw IoError("failed writing " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

}  // namespace

DType dtype_of(const AnyTensor& t) {
  if (std::holds_alternative<TensorF>(t)) return DType::F32;
  if (std::holds_alternative<TensorD>(t)) return DType::F64;
  return DType::U8;
}

const Shape& shape_of(const AnyTensor& t) {
  return std::visit([](const auto& v) -> const Shape& { return v.shape(); }, t);
}

std::vector<std::uint8_t> encode(const AnyTensor& t) {
  const Shape& shape = shape_of(t);
  if (shape.empty() || shape.size() > 255) throw DimensionError("HVSF supports ranks 1 to 255");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le<std::uint16_t>(out, kVersion);
  out.push_back(static_cast<std::uint8_t>(dtype_of(t)));
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t d : shape) put_le<std::uint64_t>(out, d);
  out.reserve(out.size() + shape_volume(shape) * dtype_size(dtype_of(t)));
  std::visit([&](const auto& v) { put_payload(out, v); }, t);
  return out;
}

AnyTensor decode(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < 8) throw FormatError("truncated", source + ": header truncated (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad-magic", source + ": not an HVSF file");
  const auto version = get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kVersion) throw FormatError("bad-version", source + ": unsupported HVSF version " + std::to_string(version));
  const std::uint8_t code = bytes[6];
  if (code < 1 || code > 3) throw FormatError("bad-dtype", source + ": unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t ndim = bytes[7];
  if (ndim == 0) throw FormatError("bad-rank", source + ": rank 0 is not allowed");
  const std::size_t header = 8 + 8 * ndim;
  if (bytes.size() < header) throw FormatError("truncated", source + ": dimension table truncated");
  Shape shape(ndim);
  std::size_t volume = 1;
  for (std::size_t a = 0; a < ndim; ++a) {
    const auto d = get_le<std::uint64_t>(bytes.data() + 8 + 8 * a);
    if (d == 0) throw FormatError("bad-shape", source + ": zero-length dimension");
    if (volume > (std::uint64_t{1} << 40) / d) throw FormatError("bad-shape", source + ": tensor too large");
    shape[a] = static_cast<std::size_t>(d);
    volume *= shape[a];
  }
  const std::size_t expected = header + volume * dtype_size(dtype);
  if (bytes.size() < expected)
    throw FormatError("truncated", source + ": payload has " + std::to_string(bytes.size() - header) + " bytes, expected " +
                                       std::to_string(expected - header));
  if (bytes.size() > expected)
    throw FormatError("trailing-bytes", source + ": " + std::to_string(bytes.size() - expected) + " bytes after payload");
  const std::uint8_t* p = bytes.data() + header;
  switch (dtype) {
    case DType::F32:
      return get_payload<float>(shape, p);
    case DType::F64:
      return get_payload<double>(shape, p);
    case DType::U8:
      break;
  }
  return get_payload<std::uint8_t>(shape, p);
}

void write_tensor(const fs::path& path, const AnyTensor& t, bool do_fsync) {
  const auto bytes = encode(t);
  write_bytes_atomic(path, bytes.data(), bytes.size(), do_fsync);
}

AnyTensor read_tensor(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing file " + path.string());
  const std::string raw = read_file(path);
  return decode(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), path.string());
}

template <typename T>
Tensor<T> read_tensor_as(const fs::path& path) {
  return convert<T>(read_tensor(path));
}

template TensorF read_tensor_as<float>(const fs::path&);
template TensorD read_tensor_as<double>(const fs::path&);
template TensorU8 read_tensor_as<std::uint8_t>(const fs::path&);

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_bytes_atomic(path, text.data(), text.size(), false);
}

// ---------------------------------------------------------------- manifest

const VideoRecord& DatasetManifest::find(const std::string& id) const {
  for (const auto& v : videos)
    if (v.id == id) return v;
  throw InvalidArgumentError("video '" + id + "' not in manifest");
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& text, const std::string& file, std::size_t line, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(file, line, "invalid number for '" + key + "': '" + text + "'");
}

std::size_t parse_count(const std::string& text, const std::string& file, std::size_t line, const std::string& key) {
  const double v = parse_real(text, file, line, key);
  if (v < 1 || v != std::floor(v)) throw ParseError(file, line, "'" + key + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text, const fs::path& origin) {
  const std::string file = origin.string();
  const fs::path base = origin.has_parent_path() ? origin.parent_path() : fs::path(".");
  DatasetManifest m;
  m.path = origin;
  std::optional<std::pair<double, double>> default_range;
  std::vector<std::optional<std::pair<double, double>>> ranges;
  std::vector<bool> has_mos;
  std::set<std::string> seen;

  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(file, lineno, "expected 'key: value', got '" + line + "'");
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (value.empty()) throw ParseError(file, lineno, "empty value for '" + key + "'");

    if (key == "video") {
      if (!seen.insert(value).second) throw ParseError(file, lineno, "duplicate video id '" + value + "'");
      VideoRecord r;
      r.id = value;
      r.line = lineno;
      m.videos.push_back(std::move(r));
      ranges.emplace_back();
      has_mos.push_back(false);
      continue;
    }
    if (key == "mos_range") {
      std::istringstream vs(value);
      std::string lo, hi, extra;
      vs >> lo >> hi;
      if (lo.empty() || hi.empty() || (vs >> extra)) throw ParseError(file, lineno, "mos_range needs '<low> <high>'");
      const double l = parse_real(lo, file, lineno, key), h = parse_real(hi, file, lineno, key);
      if (!(l < h)) throw ParseError(file, lineno, "mos_range low must be below high");
      (m.videos.empty() ? default_range : ranges.back()) = std::pair{l, h};
      continue;
    }
    if (m.videos.empty()) throw ParseError(file, lineno, "'" + key + "' outside a video record");
    VideoRecord& r = m.videos.back();
    if (key == "frames") {
      r.frames_dir = resolve(value);
    } else if (key == "raw") {
      r.raw_video = resolve(value);
    } else if (key == "raw_format") {
      if (value != "rgb24" && value != "rgbp") throw ParseError(file, lineno, "raw_format must be rgb24 or rgbp");
      r.raw_format = value;
    } else if (key == "height") {
      r.height = parse_count(value, file, lineno, key);
    } else if (key == "width") {
      r.width = parse_count(value, file, lineno, key);
    } else if (key == "num_frames") {
      r.num_frames = parse_count(value, file, lineno, key);
    } else if (key == "mos") {
      r.mos = parse_real(value, file, lineno, key);
      has_mos.back() = true;
    } else if (key == "saliency") {
      r.saliency = resolve(value);
    } else if (key == "content") {
      r.content = resolve(value);
    } else if (key == "edgefeat") {
      r.edgefeat = resolve(value);
    } else if (key == "motion") {
      r.motion = resolve(value);
    } else {
      throw ParseError(file, lineno, "unknown key '" + key + "'");
    }
  }

  if (m.videos.empty()) throw ParseError(file, lineno, "manifest lists no videos");
  for (std::size_t i = 0; i < m.videos.size(); ++i) {
    VideoRecord& r = m.videos[i];
    if (!has_mos[i]) throw ParseError(file, r.line, "video '" + r.id + "' has no mos");
    const auto range = ranges[i] ? ranges[i] : default_range;
    if (!range) throw ParseError(file, r.line, "video '" + r.id + "' has no mos_range (set it in the header or record)");
    r.mos_low = range->first;
    r.mos_high = range->second;
    if (r.mos < r.mos_low || r.mos > r.mos_high)
      throw ParseError(file, r.line, "mos " + std::to_string(r.mos) + " of '" + r.id + "' outside declared range");
    if (r.frames_dir && r.raw_video) throw ParseError(file, r.line, "video '" + r.id + "' has both frames and raw");
    if (r.raw_video && (r.height == 0 || r.width == 0 || r.num_frames == 0))
      throw ParseError(file, r.line, "raw video '" + r.id + "' needs height, width and num_frames");
    for (const auto* p : {&r.frames_dir, &r.raw_video, &r.saliency, &r.content, &r.edgefeat, &r.motion})
      if (*p && !fs::exists(**p)) throw ParseError(file, r.line, "path does not exist: " + (*p)->string());
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path) { return parse_manifest(read_file(path), path); }

std::vector<fs::path> list_tensor_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".hvsf") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<TensorF> load_frames(const VideoRecord& video) {
  std::vector<TensorF> frames;
  if (video.frames_dir) {
    for (const auto& f : list_tensor_files(*video.frames_dir)) {
      TensorF t = read_tensor_as<float>(f);
      if (t.rank() != 3 || t.dim(2) != 3)
        throw DimensionError(f.string() + ": frame must be (H, W, 3), found " + shape_to_string(t.shape()));
      if (!frames.empty() && t.shape() != frames.front().shape())
        throw DimensionError(f.string() + ": frame shape differs from the first frame");
      frames.push_back(std::move(t));
    }
    if (frames.empty()) throw IoError("no frames in " + video.frames_dir->string());
    return frames;
  }
  if (video.raw_video) {
    const std::string bytes = read_file(*video.raw_video);
    const std::size_t h = video.height, w = video.width, frame_bytes = h * w * 3;
    if (bytes.size() != frame_bytes * video.num_frames)
      throw IoError(video.raw_video->string() + ": expected " + std::to_string(frame_bytes * video.num_frames) +
                    " bytes, found " + std::to_string(bytes.size()));
    const bool planar = video.raw_format == "rgbp";
    for (std::size_t n = 0; n < video.num_frames; ++n) {
      TensorF t({h, w, 3});
      const auto* src = reinterpret_cast<const std::uint8_t*>(bytes.data()) + n * frame_bytes;
      for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t c = 0; c < 3; ++c) t[p * 3 + c] = planar ? src[c * h * w + p] : src[p * 3 + c];
      frames.push_back(std::move(t));
    }
    return frames;
  }
  throw InvalidArgumentError("video '" + video.id + "' has no frame source (frames or raw)");
}

// ---------------------------------------------------------------- checkpoint

namespace {

std::string pooling_name(head::Pooling p) { return p == head::Pooling::TempHyst ? "temphyst" : "mean"; }

}  // namespace

void write_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  std::ostringstream os;
  os.precision(17);
  const auto& d = ckpt.params.dims;
  os << "format: hvs5m-checkpoint 1\n"
     << "epoch: " << ckpt.epoch << "\n"
     << "seed: " << ckpt.seed << "\n"
     << "tau: " << ckpt.temphyst.tau << "\n"
     << "gamma: " << ckpt.temphyst.gamma << "\n"
     << "pooling: " << pooling_name(ckpt.pooling) << "\n"
     << "input: " << d.input << "\n"
     << "reduced: " << d.reduced << "\n"
     << "hidden: " << d.hidden << "\n";
  const auto tensors = ckpt.params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string name(head::HeadParams<float>::kNames[i]);
    const std::string file = name + ".hvsf";
    write_tensor(dir / file, *tensors[i]);
    os << "param: " << name << " " << file;
    for (std::size_t s : tensors[i]->shape()) os << " " << s;
    os << "\n";
  }
  if (!ckpt.input_mean.empty()) {
    write_tensor(dir / "standardizer.mean.hvsf", TensorF({ckpt.input_mean.size()}, ckpt.input_mean));
    write_tensor(dir / "standardizer.scale.hvsf", TensorF({ckpt.input_scale.size()}, ckpt.input_scale));
    os << "standardizer: standardizer.mean.hvsf standardizer.scale.hvsf\n";
  }
  write_text_atomic(dir / "config.txt", ckpt.config_text);
  write_text_atomic(dir / "checkpoint.txt", os.str());
}

Checkpoint read_checkpoint(const fs::path& dir) {
  const fs::path manifest = dir / "checkpoint.txt";
  const std::string text = read_file(manifest);
  const std::string file = manifest.string();
  Checkpoint c;
  head::HeadDims dims{0, 0, 0};
  std::vector<std::tuple<std::string, std::string, Shape, std::size_t>> params;
  std::optional<std::pair<std::string, std::string>> standardizer;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  bool format_ok = false;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(file, lineno, "expected 'key: value'");
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    std::istringstream vs(value);
    if (key == "format") {
      format_ok = value == "hvs5m-checkpoint 1";
      if (!format_ok) throw ParseError(file, lineno, "unsupported checkpoint format '" + value + "'");
    } else if (key == "epoch") {
      c.epoch = static_cast<std::size_t>(parse_real(value, file, lineno, key));
    } else if (key == "seed") {
      c.seed = std::stoull(value);
    } else if (key == "tau") {
      c.temphyst.tau = parse_count(value, file, lineno, key);
    } else if (key == "gamma") {
      c.temphyst.gamma = parse_real(value, file, lineno, key);
    } else if (key == "pooling") {
      if (value != "temphyst" && value != "mean") throw ParseError(file, lineno, "unknown pooling '" + value + "'");
      c.pooling = value == "temphyst" ? head::Pooling::TempHyst : head::Pooling::Mean;
    } else if (key == "input") {
      dims.input = parse_count(value, file, lineno, key);
    } else if (key == "reduced") {
      dims.reduced = parse_count(value, file, lineno, key);
    } else if (key == "hidden") {
      dims.hidden = parse_count(value, file, lineno, key);
    } else if (key == "param") {
      std::string name, path;
      vs >> name >> path;
      Shape shape;
      std::size_t s;
      while (vs >> s) shape.push_back(s);
      params.emplace_back(name, path, shape, lineno);
    } else if (key == "standardizer") {
      std::string a, b;
      vs >> a >> b;
      standardizer = std::pair{a, b};
    } else {
      throw ParseError(file, lineno, "unknown key '" + key + "'");
    }
  }
  if (!format_ok) throw ParseError(file, lineno, "missing format line");
  c.params = head::HeadParams<float>::zeros(dims);
  const auto expected = head::HeadParams<float>::shapes(dims);
  auto tensors = c.params.tensors();
  std::vector<bool> filled(tensors.size(), false);
  for (const auto& [name, path, shape, line] : params) {
    const auto it = std::find(head::HeadParams<float>::kNames.begin(), head::HeadParams<float>::kNames.end(), name);
    if (it == head::HeadParams<float>::kNames.end()) throw ParseError(file, line, "unknown parameter '" + name + "'");
    const auto idx = static_cast<std::size_t>(it - head::HeadParams<float>::kNames.begin());
    TensorF t = read_tensor_as<float>(dir / path);
    if (shape != expected[idx] || t.shape() != expected[idx])
      throw DimensionError("checkpoint parameter " + name + ": expected " + shape_to_string(expected[idx]) +
                           ", found " + shape_to_string(t.shape()));
    *tensors[idx] = std::move(t);
    filled[idx] = true;
  }
  for (std::size_t i = 0; i < filled.size(); ++i)
    if (!filled[i]) throw ParseError(file, lineno, "checkpoint lacks parameter " + std::string(head::HeadParams<float>::kNames[i]));
  if (standardizer) {
    const TensorF mean = read_tensor_as<float>(dir / standardizer->first);
    const TensorF scale = read_tensor_as<float>(dir / standardizer->second);
    if (mean.size() != dims.input || scale.size() != dims.input)
      throw DimensionError("checkpoint standardizer length differs from input width " + std::to_string(dims.input));
    c.input_mean.assign(mean.data().begin(), mean.data().end());
    c.input_scale.assign(scale.data().begin(), scale.data().end());
  }
  if (fs::exists(dir / "config.txt")) c.config_text = read_file(dir / "config.txt");
  return c;
}

}  // namespace hvs::io
