#include "hvs5m/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hvs5m/io.hpp"
#include "hvs5m/random.hpp"

namespace hvs::synth {

Scene Scene::random(std::uint64_t seed) {
  Rng rng(seed);
  Scene s;
  for (auto& waves : s.waves) {
    for (int k = 0; k < 4; ++k) {
      const double freq = 0.05 + 0.25 * uniform01(rng);
      const double angle = 2.0 * std::numbers::pi * uniform01(rng);
      waves.push_back({freq * std::cos(angle), freq * std::sin(angle), 2.0 * std::numbers::pi * uniform01(rng),
                       15.0 + 25.0 * uniform01(rng)});
    }
  }
  for (int k = 0; k < 6; ++k) {
    const double x = 80.0 * uniform01(rng), y = 64.0 * uniform01(rng);
    s.blocks.push_back({x, y, x + 6.0 + 20.0 * uniform01(rng), y + 6.0 + 20.0 * uniform01(rng),
                        uniform_symmetric(rng, 60.0)});
  }
  return s;
}

double Scene::value(double x, double y, std::size_t channel) const {
  double v = 128.0;
  for (const auto& w : waves[channel]) v += w.amplitude * std::sin(w.kx * x + w.ky * y + w.phase);
  // The blocks repeat every 96 pixels horizontally, so a pan never runs dry.
  const double xm = x - 96.0 * std::floor(x / 96.0);
  for (const auto& b : blocks)
    if (xm >= b.x0 && xm < b.x1 && y >= b.y0 && y < b.y1) v += b.level;
  return v;
}

std::vector<TensorF> render(const Scene& scene, const Latents& lat, std::size_t height, std::size_t width,
                            std::size_t frames, std::uint64_t noise_seed) {
  Rng rng(noise_seed);
  std::vector<TensorF> out;
  out.reserve(frames);
  for (std::size_t n = 0; n < frames; ++n) {
    TensorF f({height, width, 3});
    const double shift = lat.speed * static_cast<double>(n);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
          double v = scene.value(static_cast<double>(x) + shift, static_cast<double>(y), c);
          v = 128.0 + lat.contrast * (v - 128.0) + lat.brightness + lat.noise * standard_normal(rng);
          f(y, x, c) = static_cast<float>(std::round(std::clamp(v, 0.0, 255.0)));
        }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<double> linear_functional_mos(const std::vector<pipeline::VideoFeatures>& features, std::uint64_t seed,
                                          double noise_sigma) {
  const std::size_t n = features.size();
  if (n < 2) throw InvalidArgumentError("need at least 2 videos to define a score");
  const std::size_t width = features.front().fused.dim(1);
  std::vector<std::vector<double>> pooled(n, std::vector<double>(width, 0.0));
  for (std::size_t v = 0; v < n; ++v) {
    const auto& f = features[v].fused;
    if (f.rank() != 2 || f.dim(1) != width) throw DimensionError("fused widths differ across videos");
    for (std::size_t r = 0; r < f.dim(0); ++r)
      for (std::size_t c = 0; c < width; ++c) pooled[v][c] += f(r, c);
    for (double& x : pooled[v]) x /= static_cast<double>(f.dim(0));
  }
  for (std::size_t c = 0; c < width; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t v = 0; v < n; ++v) mean += pooled[v][c];
    mean /= static_cast<double>(n);
    for (std::size_t v = 0; v < n; ++v) sq += (pooled[v][c] - mean) * (pooled[v][c] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    for (std::size_t v = 0; v < n; ++v) pooled[v][c] = sd > 1e-9 ? (pooled[v][c] - mean) / sd : 0.0;
  }
  Rng rng(seed);
  std::vector<double> w(width);
  for (double& x : w) x = standard_normal(rng);
  std::vector<double> score(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t c = 0; c < width; ++c) score[v] += w[c] * pooled[v][c];
  double mean = 0.0, sq = 0.0;
  for (double s : score) mean += s;
  mean /= static_cast<double>(n);
  for (double s : score) sq += (s - mean) * (s - mean);
  const double sd = std::sqrt(sq / static_cast<double>(n));
  if (!(sd > 0.0)) throw NumericError("synthetic score has zero variance");
  for (double& s : score) s = (s - mean) / sd + noise_sigma * standard_normal(rng);
  return score;
}

Dataset make_dataset(const Options& o, const pipeline::FeatureExtractor& extractor) {
  if (o.videos < 2) throw InvalidArgumentError("a dataset needs at least 2 videos");
  Rng rng(o.seed);
  const Scene scene = Scene::random(o.seed ^ 0x5ce9e5ULL);
  Dataset d;
  for (std::size_t v = 0; v < o.videos; ++v) {
    // One distortion level drives every degradation; small independent
    // nuisance terms keep the videos from lying on an exact curve.
    const double level = uniform01(rng);
    Latents lat;
    lat.contrast = std::clamp(1.0 - 0.6 * level + uniform_symmetric(rng, o.nuisance * 0.1), 0.05, 1.5);
    lat.noise = std::max(0.0, 25.0 * level + uniform_symmetric(rng, o.nuisance * 3.0));
    lat.speed = std::max(0.0, 3.0 * level + uniform_symmetric(rng, o.nuisance * 0.5));
    lat.brightness = uniform_symmetric(rng, o.nuisance * 15.0);
    d.levels.push_back(level);
    std::ostringstream id;
    id << "vid" << (v < 10 ? "0" : "") << v;
    d.ids.push_back(id.str());
    d.latents.push_back(lat);
    d.frames.push_back(render(scene, lat, o.height, o.width, o.frames, o.seed * 1000003ULL + v + 1));
  }
  d.features.resize(o.videos);
  for (std::size_t v = 0; v < o.videos; ++v) {
    d.features[v] = extractor.extract(d.frames[v]);
    d.features[v].id = d.ids[v];
  }
  const std::vector<double> score = linear_functional_mos(d.features, o.seed + 17, o.mos_noise);
  for (double s : score) d.mos.push_back(3.0 + s);
  d.mos_low = std::floor(*std::min_element(d.mos.begin(), d.mos.end())) - 1.0;
  d.mos_high = std::ceil(*std::max_element(d.mos.begin(), d.mos.end())) + 1.0;
  return d;
}

std::filesystem::path write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream m;
  m.precision(17);
  m << "mos_range: " << d.mos_low << " " << d.mos_high << "\n";
  for (std::size_t v = 0; v < d.ids.size(); ++v) {
    const auto vdir = dir / d.ids[v];
    std::filesystem::create_directories(vdir);
    for (std::size_t n = 0; n < d.frames[v].size(); ++n) {
      char name[32];
      std::snprintf(name, sizeof name, "frame%04zu.hvsf", n);
      io::write_tensor(vdir / name, d.frames[v][n].cast<std::uint8_t>());
    }
    m << "\nvideo: " << d.ids[v] << "\nframes: " << d.ids[v] << "\nmos: " << d.mos[v] << "\n";
  }
  const auto manifest = dir / "manifest.txt";
  io::write_text_atomic(manifest, m.str());
  return manifest;
}

std::vector<train::Sample> samples(const Dataset& d) {
  std::vector<train::Sample> out;
  for (std::size_t v = 0; v < d.ids.size(); ++v) out.push_back({d.ids[v], d.features[v].fused, d.mos[v]});
  return out;
}

}  // namespace hvs::synth
