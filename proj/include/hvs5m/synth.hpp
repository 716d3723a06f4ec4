#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hvs5m/pipeline.hpp"
#include "hvs5m/tensor.hpp"

namespace hvs::synth {

// A smooth colour scene shared by every video of a dataset: a few random
// plane waves per channel plus axis-aligned blocks. Evaluated analytically so
// sub-pixel motion needs no resampling.
struct Scene {
  struct Wave {
    double kx, ky, phase, amplitude;
  };
  struct Block {
    double x0, y0, x1, y1, level;
  };
  std::vector<Wave> waves[3];
  std::vector<Block> blocks;

  static Scene random(std::uint64_t seed);
  double value(double x, double y, std::size_t channel) const;  // roughly [0, 255]
};

// Per-video degradations.
struct Latents {
  double contrast = 1.0;    // scales deviations from mid-grey
  double noise = 0.0;       // additive Gaussian sigma, grey levels
  double speed = 0.0;       // horizontal pan, pixels per frame
  double brightness = 0.0;  // offset, grey levels
};

std::vector<TensorF> render(const Scene& scene, const Latents& latents, std::size_t height, std::size_t width,
                            std::size_t frames, std::uint64_t noise_seed);

struct Options {
  std::size_t videos = 20;
  std::size_t height = 128, width = 128, frames = 8;
  std::uint64_t seed = 0;
  double mos_noise = 0.05;  // on a unit-variance score
  double nuisance = 0.5;    // scale of the per-video variation not tied to the distortion level
};

struct Dataset {
  std::vector<std::string> ids;
  std::vector<Latents> latents;
  std::vector<double> levels;  // distortion level in [0, 1]
  std::vector<std::vector<TensorF>> frames;
  std::vector<pipeline::VideoFeatures> features;
  std::vector<double> mos;
  double mos_low = 0.0, mos_high = 0.0;
};

// The score is a fixed random direction applied to the time-averaged,
// column-standardised fused features, rescaled to unit variance, then noised.
std::vector<double> linear_functional_mos(const std::vector<pipeline::VideoFeatures>& features, std::uint64_t seed,
                                          double noise_sigma);

Dataset make_dataset(const Options& options, const pipeline::FeatureExtractor& extractor);

// Frames as u8 HVSF files, one directory per video, plus manifest.txt.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

std::vector<train::Sample> samples(const Dataset& dataset);

}  // namespace hvs::synth
