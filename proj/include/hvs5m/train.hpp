#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hvs5m/head.hpp"
#include "hvs5m/metrics.hpp"

namespace hvs::train {

struct Sample {
  std::string id;
  TensorF fused;  // (N', width)
  double mos = 0.0;
};

// Column-wise z-scoring of fused features fitted on the training rows.
// Columns with (near) zero spread keep unit scale.
struct Standardizer {
  std::vector<float> mean;
  std::vector<float> scale;  // multiplies (x - mean)

  static Standardizer fit(std::span<const Sample> samples);
  bool empty() const noexcept { return mean.empty(); }
  TensorF apply(const TensorF& fused) const;
};

struct TrainOptions {
  double lr = 1e-5;
  double decay = 0.2;            // lr multiplier ...
  std::size_t decay_every = 2;   // ... applied every this many epochs
  std::size_t epochs = 30;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::size_t patience = 10;     // epochs without a better checkpoint; 0 disables early stop
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool standardize = true;
  std::size_t reduced = 256;
  std::size_t hidden = 72;
  head::LossOptions loss;
  head::TempHystConfig temphyst;
  head::Pooling pooling = head::Pooling::TempHyst;
  std::size_t threads = 1;
};

// lr_e = lr * decay^floor(e / decay_every), epochs counted from 0.
double learning_rate(const TrainOptions& options, std::size_t epoch);

class Adam {
 public:
  Adam(const head::HeadParams<float>& like, double beta1, double beta2, double eps);
  void step(head::HeadParams<float>& params, const head::HeadParams<float>& grads, double lr);
  std::size_t steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean batch loss during the epoch
  metrics::EvalReport train;
  metrics::EvalReport val;
};

struct TrainResult {
  head::HeadParams<float> params;  // best checkpoint
  Standardizer standardizer;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam on the correlation loss. The returned parameters are those of the
// epoch with the best validation SRCC (training SRCC when there is no usable
// validation set); ties keep the earlier epoch.
TrainResult train(std::span<const Sample> train_set, std::span<const Sample> val_set, const TrainOptions& options,
                  const EpochCallback& on_epoch = {});

std::vector<double> predict(const head::HeadParams<float>& params, const Standardizer& standardizer,
                            std::span<const Sample> samples, const head::TempHystConfig& cfg, head::Pooling pooling,
                            std::size_t threads = 1);

}  // namespace hvs::train
