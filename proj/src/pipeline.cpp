#include "hvs5m/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hvs5m/parallel.hpp"

namespace hvs::pipeline {

std::size_t PipelineConfig::spatial_width() const {
  std::size_t w = 0;
  if (!ablation.disable_content) w += 2 * content.channels_out;
  if (!ablation.disable_edge) w += 2 * edge.channels_out;
  return w;
}

std::size_t PipelineConfig::temporal_width() const { return ablation.disable_motion ? 0 : 2 * motion.channels_out; }

std::size_t PipelineConfig::fused_width() const { return spatial_width() + temporal_width(); }

head::Pooling PipelineConfig::pooling() const {
  return ablation.replace_temphyst_with_fc ? head::Pooling::Mean : head::Pooling::TempHyst;
}

train::TrainOptions PipelineConfig::training_options() const {
  train::TrainOptions o = train;
  o.temphyst = temphyst;
  o.pooling = pooling();
  o.threads = resolve_threads(threads);
  return o;
}

void PipelineConfig::validate() const {
  canny.validate();
  temphyst.validate();
  if (fused_width() == 0) throw InvalidArgumentError("every feature branch is disabled");
  const double sum = split_train + split_val + split_test;
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgumentError("split ratios must sum to 1");
  if (!(saliency.threshold > 0.0 && saliency.threshold < 255.0))
    throw InvalidArgumentError("saliency threshold must lie in (0, 255)");
}

// ---------------------------------------------------------------- config text

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw InvalidArgumentError("config " + key + ": invalid number '" + v + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long d = std::stoull(v, &used);
    if (used == v.size() && v.find('-') == std::string::npos) return d;
  } catch (const std::exception&) {
  }
  throw InvalidArgumentError("config " + key + ": invalid non-negative integer '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidArgumentError("config " + key + ": invalid boolean '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const PipelineConfig&)>;

struct Field {
  std::string key;
  Setter set;
  Getter get;
};

void add_backbone(std::vector<Field>& f, const std::string& name, features::BackboneSpec PipelineConfig::*member) {
  f.push_back({"backbone." + name + ".kind",
               [member](PipelineConfig& c, const std::string&, const std::string& v) {
                 (c.*member).kind = features::parse_backbone_kind(v);
               },
               [member](const PipelineConfig& c) { return features::to_string((c.*member).kind); }});
  f.push_back({"backbone." + name + ".channels",
               [member](PipelineConfig& c, const std::string& k, const std::string& v) {
                 (c.*member).channels_out = to_uint(k, v);
               },
               [member](const PipelineConfig& c) { return std::to_string((c.*member).channels_out); }});
  f.push_back({"backbone." + name + ".stride",
               [member](PipelineConfig& c, const std::string& k, const std::string& v) {
                 (c.*member).stride = to_uint(k, v);
               },
               [member](const PipelineConfig& c) { return std::to_string((c.*member).stride); }});
  f.push_back({"backbone." + name + ".seed",
               [member](PipelineConfig& c, const std::string& k, const std::string& v) {
                 (c.*member).seed = to_uint(k, v);
               },
               [member](const PipelineConfig& c) { return std::to_string((c.*member).seed); }});
}

#define HVS_REAL(KEY, EXPR)                                                                                \
  f.push_back({KEY, [](PipelineConfig& c, const std::string& k, const std::string& v) { EXPR = to_real(k, v); }, \
               [](const PipelineConfig& c) { return fmt(EXPR); }})
#define HVS_UINT(KEY, EXPR)                                                                                \
  f.push_back({KEY, [](PipelineConfig& c, const std::string& k, const std::string& v) { EXPR = to_uint(k, v); }, \
               [](const PipelineConfig& c) { return std::to_string(EXPR); }})
#define HVS_BOOL(KEY, EXPR)                                                                                \
  f.push_back({KEY, [](PipelineConfig& c, const std::string& k, const std::string& v) { EXPR = to_bool(k, v); }, \
               [](const PipelineConfig& c) { return std::string((EXPR) ? "true" : "false"); }})

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    add_backbone(f, "content", &PipelineConfig::content);
    add_backbone(f, "edge", &PipelineConfig::edge);
    add_backbone(f, "motion", &PipelineConfig::motion);
    HVS_BOOL("backbone.normalize_edges", c.normalize_edges);

    f.push_back({"saliency.source",
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   if (v == "toy") c.saliency_source = SaliencySource::Toy;
                   else if (v == "file") c.saliency_source = SaliencySource::File;
                   else throw InvalidArgumentError("config " + k + ": expected toy or file");
                 },
                 [](const PipelineConfig& c) { return std::string(c.saliency_source == SaliencySource::Toy ? "toy" : "file"); }});
    HVS_REAL("saliency.threshold", c.saliency.threshold);
    f.push_back({"saliency.compare",
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   if (v == "scaled") c.saliency.compare = saliency::Compare::Scaled;
                   else if (v == "raw") c.saliency.compare = saliency::Compare::Raw;
                   else throw InvalidArgumentError("config " + k + ": expected scaled or raw");
                 },
                 [](const PipelineConfig& c) {
                   return std::string(c.saliency.compare == saliency::Compare::Scaled ? "scaled" : "raw");
                 }});
    f.push_back({"saliency.resize",
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   if (v == "area") c.saliency.resize = saliency::Resize::Area;
                   else if (v == "bilinear") c.saliency.resize = saliency::Resize::Bilinear;
                   else throw InvalidArgumentError("config " + k + ": expected area or bilinear");
                 },
                 [](const PipelineConfig& c) {
                   return std::string(c.saliency.resize == saliency::Resize::Area ? "area" : "bilinear");
                 }});

    HVS_REAL("canny.upper", c.canny.upper);
    HVS_REAL("canny.lower", c.canny.lower);
    HVS_REAL("canny.sigma", c.canny.sigma);
    HVS_UINT("canny.kernel", c.canny.kernel);

    HVS_UINT("temphyst.tau", c.temphyst.tau);
    HVS_REAL("temphyst.gamma", c.temphyst.gamma);

    HVS_REAL("train.lr", c.train.lr);
    HVS_REAL("train.decay", c.train.decay);
    HVS_UINT("train.decay_every", c.train.decay_every);
    HVS_UINT("train.epochs", c.train.epochs);
    HVS_UINT("train.batch", c.train.batch);
    HVS_UINT("train.seed", c.train.seed);
    HVS_UINT("train.patience", c.train.patience);
    HVS_REAL("train.beta1", c.train.beta1);
    HVS_REAL("train.beta2", c.train.beta2);
    HVS_REAL("train.adam_eps", c.train.adam_eps);
    HVS_BOOL("train.standardize", c.train.standardize);
    f.push_back({"train.rank_mode",
                 [](PipelineConfig& c, const std::string& k, const std::string& v) {
                   if (v == "detached") c.train.loss.rank_mode = head::RankMode::Detached;
                   else if (v == "soft") c.train.loss.rank_mode = head::RankMode::Soft;
                   else throw InvalidArgumentError("config " + k + ": expected detached or soft");
                 },
                 [](const PipelineConfig& c) {
                   return std::string(c.train.loss.rank_mode == head::RankMode::Detached ? "detached" : "soft");
                 }});
    HVS_REAL("train.soft_temperature", c.train.loss.soft_temperature);
    HVS_REAL("train.loss_epsilon", c.train.loss.epsilon);
    HVS_UINT("head.reduced", c.train.reduced);
    HVS_UINT("head.hidden", c.train.hidden);

    HVS_REAL("split.train", c.split_train);
    HVS_REAL("split.val", c.split_val);
    HVS_REAL("split.test", c.split_test);
    HVS_UINT("split.seed", c.split_seed);

    HVS_BOOL("ablation.disable_saliency", c.ablation.disable_saliency);
    HVS_BOOL("ablation.disable_content", c.ablation.disable_content);
    HVS_BOOL("ablation.disable_edge", c.ablation.disable_edge);
    HVS_BOOL("ablation.disable_motion", c.ablation.disable_motion);
    HVS_BOOL("ablation.replace_temphyst_with_fc", c.ablation.replace_temphyst_with_fc);

    HVS_UINT("runtime.threads", c.threads);
    return f;
  }();
  return table;
}

#undef HVS_REAL
#undef HVS_UINT
#undef HVS_BOOL

}  // namespace

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw InvalidArgumentError("unknown config key '" + key + "'");
}

PipelineConfig parse_config(const std::string& text, const std::string& origin, PipelineConfig base) {
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, lineno, "expected 'key = value'");
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const InvalidArgumentError& e) {
      throw ParseError(origin, lineno, e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), path.string(), std::move(base));
}

std::string to_text(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

// ---------------------------------------------------------------- extraction

FeatureExtractor::FeatureExtractor(PipelineConfig cfg)
    : cfg_(std::move(cfg)), content_(cfg_.content, 3), edge_(cfg_.edge, 3), motion_(cfg_.motion) {
  cfg_.validate();
}

bool FeatureExtractor::needs_frames() const {
  const auto& a = cfg_.ablation;
  const bool spatial = !a.disable_content || !a.disable_edge;
  return (spatial && !a.disable_saliency && cfg_.saliency_source == SaliencySource::Toy) ||
         (!a.disable_content && cfg_.content.kind == features::BackboneKind::ToyConv) ||
         (!a.disable_edge && cfg_.edge.kind == features::BackboneKind::ToyConv) ||
         (!a.disable_motion && cfg_.motion.kind == features::BackboneKind::ToyConv);
}

namespace {

TensorF slice_leading(const TensorF& stack, std::size_t index) {
  Shape inner(stack.shape().begin() + 1, stack.shape().end());
  const std::size_t vol = shape_volume(inner);
  auto d = stack.data().subspan(index * vol, vol);
  return TensorF(inner, std::vector<float>(d.begin(), d.end()));
}

const TensorF& require_input(const std::optional<TensorF>& t, const char* what) {
  if (!t) throw InvalidArgumentError(std::string("file-backed ") + what + " branch has no stored tensor");
  return *t;
}

}  // namespace

VideoFeatures FeatureExtractor::extract(std::span<const TensorF> frames, const BranchInputs& in) const {
  const auto& a = cfg_.ablation;
  const bool use_content = !a.disable_content, use_edge = !a.disable_edge, use_motion = !a.disable_motion;
  const bool use_saliency = (use_content || use_edge) && !a.disable_saliency;
  using features::BackboneKind;

  std::size_t n = frames.size();
  if (n == 0) {
    if (use_content && in.content) n = in.content->dim(0);
    else if (use_edge && in.edgefeat) n = in.edgefeat->dim(0);
    else if (use_saliency && in.saliency) n = in.saliency->dim(0);
    else if (use_motion && in.motion) n = 2 * in.motion->dim(0);
  }
  if (n < 2) throw InputTooSmallError("a video needs at least 2 frames, got " + std::to_string(n));
  if (needs_frames() && frames.size() != n)
    throw InvalidArgumentError("pipeline needs decoded frames for a toy branch but none were provided");
  if (!frames.empty()) {
    for (const auto& f : frames)
      if (f.rank() != 3 || f.dim(2) != 3 || f.shape() != frames.front().shape())
        throw DimensionError("frames must share one (H, W, 3) shape, found " + shape_to_string(f.shape()));
  }
  auto check_stack = [&](const std::optional<TensorF>& t, const char* what, std::size_t want) {
    if (t && (t->rank() != 4 || t->dim(0) != want))
      throw DimensionError(std::string("stored ") + what + " tensor must be (" + std::to_string(want) +
                           ", ...), found " + shape_to_string(t->shape()));
  };
  if (use_content && cfg_.content.kind == BackboneKind::File) {
    require_input(in.content, "content");
    check_stack(in.content, "content", n);
  }
  if (use_edge && cfg_.edge.kind == BackboneKind::File) {
    require_input(in.edgefeat, "edge");
    check_stack(in.edgefeat, "edgefeat", n);
  }
  if (use_saliency && cfg_.saliency_source == SaliencySource::File) {
    require_input(in.saliency, "saliency");
    check_stack(in.saliency, "saliency", n);
  }

  VideoFeatures out;
  const std::size_t steps = n / 2;
  const bool use_spatial = use_content || use_edge;
  std::vector<TensorF> spatial(n);
  for (std::size_t k = 0; use_spatial && k < steps; ++k) {
    const std::size_t idx = 2 * k;
    std::vector<TensorF> parts;
    std::optional<TensorF> content_map, edge_map;
    if (use_content) {
      content_map = cfg_.content.kind == BackboneKind::File ? content_.validate_stored(slice_leading(*in.content, idx))
                                                            : content_.run(frames[idx]);
    }
    if (use_edge) {
      if (cfg_.edge.kind == BackboneKind::File) {
        edge_map = edge_.validate_stored(slice_leading(*in.edgefeat, idx));
      } else {
        TensorF image = edge::edge_maps(frames[idx], cfg_.canny).cast<float>();
        if (cfg_.normalize_edges)
          for (float& v : image.data()) v /= 255.0f;
        edge_map = edge_.run(image);
      }
    }
    const TensorF& grid = content_map ? *content_map : *edge_map;
    if (content_map && edge_map && (content_map->dim(0) != edge_map->dim(0) || content_map->dim(1) != edge_map->dim(1)))
      throw DimensionError("content maps " + shape_to_string(content_map->shape()) + " and edge maps " +
                           shape_to_string(edge_map->shape()) + " differ spatially");

    std::optional<TensorF> mask;
    if (use_saliency) {
      const TensorF raw = cfg_.saliency_source == SaliencySource::File ? slice_leading(*in.saliency, idx)
                                                                       : saliency::toy_saliency(frames[idx]);
      saliency::AdjustOptions opts = cfg_.saliency;
      opts.target_height = grid.dim(0);
      opts.target_width = grid.dim(1);
      mask = saliency::adjust_saliency(raw, opts);
    }
    const TensorF* m = mask ? &*mask : nullptr;
    if (content_map) parts.push_back(features::attended_statistics(*content_map, m));
    if (edge_map) parts.push_back(features::attended_statistics(*edge_map, m));
    spatial[idx] = concat<float>(std::span<const TensorF>(parts), 0);
    if (k == 0) {
      if (content_map) out.shapes.content_map = content_map->shape();
      if (edge_map) out.shapes.edge_map = edge_map->shape();
      if (mask) out.shapes.saliency_map = mask->shape();
      out.shapes.spatial = spatial[idx].shape();
    }
  }
  // Odd frames are never sampled; give them the right width for fuse().
  if (use_spatial) {
    for (std::size_t i = 1; i < n; i += 2) spatial[i] = TensorF({spatial[0].size()});
    if (n % 2 == 1) spatial[n - 1] = TensorF({spatial[0].size()});
  }

  std::optional<TensorF> temporal;
  if (use_motion) {
    const TensorF motion = cfg_.motion.kind == BackboneKind::File
                               ? motion_.validate_stored(require_input(in.motion, "motion"), n)
                               : motion_.run(frames.subspan(0, 2 * steps));
    out.shapes.motion_map = motion.shape();
    temporal = features::temporal_statistics(motion);
    out.shapes.temporal = temporal->shape();
  }
  // validate() guarantees at least one branch is on.
  out.fused = use_spatial ? features::fuse(spatial, temporal ? &*temporal : nullptr) : *temporal;
  out.shapes.fused = out.fused.shape();
  return out;
}

VideoFeatures FeatureExtractor::extract(const io::VideoRecord& video) const {
  const auto& a = cfg_.ablation;
  using features::BackboneKind;
  BranchInputs in;
  auto load = [&](const std::optional<std::filesystem::path>& p, const char* key) -> TensorF {
    if (!p) throw IoError("video '" + video.id + "': file-backed branch needs '" + key + "' in the manifest");
    return io::read_tensor_as<float>(*p);
  };
  const bool spatial = !a.disable_content || !a.disable_edge;
  if (spatial && !a.disable_saliency && cfg_.saliency_source == SaliencySource::File) in.saliency = load(video.saliency, "saliency");
  if (!a.disable_content && cfg_.content.kind == BackboneKind::File) in.content = load(video.content, "content");
  if (!a.disable_edge && cfg_.edge.kind == BackboneKind::File) in.edgefeat = load(video.edgefeat, "edgefeat");
  if (!a.disable_motion && cfg_.motion.kind == BackboneKind::File) in.motion = load(video.motion, "motion");
  std::vector<TensorF> frames;
  if (needs_frames()) frames = io::load_frames(video);
  VideoFeatures f = extract(frames, in);
  f.id = video.id;
  return f;
}

std::vector<VideoFeatures> FeatureExtractor::extract_all(const io::DatasetManifest& manifest) const {
  std::vector<VideoFeatures> out(manifest.videos.size());
  parallel_for(manifest.videos.size(), resolve_threads(cfg_.threads),
               [&](std::size_t i) { out[i] = extract(manifest.videos[i]); });
  return out;
}

std::vector<train::Sample> to_samples(const io::DatasetManifest& manifest, std::vector<VideoFeatures> features) {
  if (features.size() != manifest.videos.size()) throw DimensionError("feature count differs from manifest");
  std::vector<train::Sample> out;
  out.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    out.push_back({manifest.videos[i].id, std::move(features[i].fused), manifest.videos[i].mos});
  return out;
}

}  // namespace hvs::pipeline
