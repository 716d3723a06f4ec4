#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hvs5m/edge.hpp"
#include "hvs5m/features.hpp"
#include "hvs5m/head.hpp"
#include "hvs5m/io.hpp"
#include "hvs5m/saliency.hpp"
#include "hvs5m/train.hpp"

namespace hvs::pipeline {

struct Ablation {
  bool disable_saliency = false;          // attention mask == 1
  bool disable_content = false;           // drop C statistics
  bool disable_edge = false;              // drop E statistics
  bool disable_motion = false;            // drop the temporal branch
  bool replace_temphyst_with_fc = false;  // mean of q_n instead of hysteresis pooling

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

enum class SaliencySource { Toy, File };

struct PipelineConfig {
  features::BackboneSpec content{features::BackboneKind::ToyConv, features::kContentChannels, 32, 1};
  features::BackboneSpec edge{features::BackboneKind::ToyConv, features::kEdgeChannels, 32, 2};
  features::BackboneSpec motion{features::BackboneKind::ToyConv, features::kMotionChannels, 32, 3};
  bool normalize_edges = false;  // feed edge maps as {0, 1} instead of {0, 255}

  SaliencySource saliency_source = SaliencySource::Toy;
  saliency::AdjustOptions saliency;
  edge::CannyParams canny;
  head::TempHystConfig temphyst;
  train::TrainOptions train;

  double split_train = 0.6, split_val = 0.2, split_test = 0.2;
  std::uint64_t split_seed = 0;

  Ablation ablation;
  std::size_t threads = 0;  // 0: HVS5M_THREADS, then hardware concurrency

  std::size_t spatial_width() const;
  std::size_t temporal_width() const;
  std::size_t fused_width() const;
  head::Pooling pooling() const;
  // TrainOptions with temphyst, pooling and threads filled in.
  train::TrainOptions training_options() const;
  void validate() const;
};

// Flat "section.key = value" text. Unknown keys are errors.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);
PipelineConfig parse_config(const std::string& text, const std::string& origin, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
// Every key with its current value, in a fixed order; parse_config(to_text(c)) == c.
std::string to_text(const PipelineConfig& cfg);

// Precomputed branch tensors, stacked over frames. Any of them may be absent.
struct BranchInputs {
  std::optional<TensorF> saliency;  // (N, H, W, 1) raw maps in [0, 1]
  std::optional<TensorF> content;   // (N, H', W', C)
  std::optional<TensorF> edgefeat;  // (N, H', W', C)
  std::optional<TensorF> motion;    // (N/2, H', W', C)
};

struct StageShapes {
  Shape content_map, edge_map, saliency_map, spatial, motion_map, temporal, fused;
};

struct VideoFeatures {
  std::string id;
  TensorF fused;  // (floor(N/2), fused_width)
  StageShapes shapes;
};

class FeatureExtractor {
 public:
  explicit FeatureExtractor(PipelineConfig cfg);

  const PipelineConfig& config() const noexcept { return cfg_; }
  bool needs_frames() const;

  // `frames` may be empty when every enabled branch is file-backed.
  VideoFeatures extract(std::span<const TensorF> frames, const BranchInputs& inputs = {}) const;
  VideoFeatures extract(const io::VideoRecord& video) const;
  std::vector<VideoFeatures> extract_all(const io::DatasetManifest& manifest) const;

 private:
  PipelineConfig cfg_;
  features::SpatialBackbone content_;
  features::SpatialBackbone edge_;
  features::MotionBackbone motion_;
};

std::vector<train::Sample> to_samples(const io::DatasetManifest& manifest, std::vector<VideoFeatures> features);

}  // namespace hvs::pipeline
