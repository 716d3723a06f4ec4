#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hvs5m/tensor.hpp"

namespace hvs::head {

struct HeadDims {
  std::size_t input = 8704;
  std::size_t reduced = 256;
  std::size_t hidden = 72;

  friend bool operator==(const HeadDims&, const HeadDims&) = default;
};

struct TempHystConfig {
  std::size_t tau = 12;
  double gamma = 0.5;

  void validate() const;
};

// TempHyst is the memory/anticipation pooling; Mean averages q_n directly
// (used when the hysteresis stage is replaced in ablations).
enum class Pooling { TempHyst, Mean };

// Parameters of FC(input -> reduced), a single-layer GRU(reduced -> hidden)
// and FC(hidden -> 1). GRU rows are stacked by gate: reset, update, candidate,
// with the candidate's recurrent term gated by the reset vector:
//   r = sig(Wir f + bir + Whr h + bhr)
//   z = sig(Wiz f + biz + Whz h + bhz)
//   n = tanh(Win f + bin + r * (Whn h + bhn))
//   h' = (1 - z) * n + z * h
template <typename T>
struct HeadParams {
  HeadDims dims;
  Tensor<T> fc_weight;      // (reduced, input)
  Tensor<T> fc_bias;        // (reduced)
  Tensor<T> gru_weight_ih;  // (3 hidden, reduced)
  Tensor<T> gru_weight_hh;  // (3 hidden, hidden)
  Tensor<T> gru_bias_ih;    // (3 hidden)
  Tensor<T> gru_bias_hh;    // (3 hidden)
  Tensor<T> score_weight;   // (1, hidden)
  Tensor<T> score_bias;     // (1)

  static constexpr std::size_t kCount = 8;
  static constexpr std::array<std::string_view, kCount> kNames{
      "fc.weight",       "fc.bias",       "gru.weight_ih", "gru.weight_hh",
      "gru.bias_ih",     "gru.bias_hh",   "score.weight",  "score.bias"};

  static HeadParams zeros(HeadDims dims);
  // Uniform in +-sqrt(1/fan_in): fan_in = input for the reduction layer and
  // hidden for the GRU and the score layer.
  static HeadParams init(HeadDims dims, std::uint64_t seed);

  std::array<Tensor<T>*, kCount> tensors();
  std::array<const Tensor<T>*, kCount> tensors() const;
  static std::array<Shape, kCount> shapes(HeadDims dims);

  template <typename U>
  HeadParams<U> cast() const {
    HeadParams<U> out;
    out.dims = dims;
    auto dst = out.tensors();
    auto src = tensors();
    for (std::size_t i = 0; i < kCount; ++i) *dst[i] = src[i]->template cast<U>();
    return out;
  }

  bool all_finite() const;
};

template <typename T>
struct QualityTrace {
  std::vector<T> q;        // per-step scores
  std::vector<T> x;        // memory: min of previous tau scores
  std::vector<T> y;        // anticipation: softmin-weighted next scores
  std::vector<T> q_prime;  // gamma x + (1 - gamma) y
  T Q{};                   // mean of q_prime
  std::vector<std::size_t> argmin;  // index feeding x_n (smallest on ties)
};

// Hysteresis pooling of a score sequence (0-based):
//   x_0 = q_0, x_n = min q_k over [max(0, n - tau), n - 1]
//   y_n = sum_k q_k w_k over [n, min(n + tau, N - 1)], w = softmax(-q)
template <typename T>
QualityTrace<T> temporal_hysteresis(std::span<const T> q, const TempHystConfig& cfg);

template <typename T>
QualityTrace<T> mean_pooling(std::span<const T> q);

template <typename T>
struct ForwardCache {
  std::size_t steps = 0;
  std::vector<T> input;    // (steps, input)
  std::vector<T> reduced;  // (steps, reduced)
  std::vector<T> h;        // (steps + 1, hidden); row 0 is the zero state
  std::vector<T> r, z, n;  // (steps, hidden)
  std::vector<T> hn;       // Whn h + bhn, (steps, hidden)
  Pooling pooling = Pooling::TempHyst;
  TempHystConfig cfg;
  QualityTrace<T> trace;
};

// Scores one video's fused features (N', input). Fills `cache` for backward.
template <typename T>
QualityTrace<T> forward(const Tensor<T>& fused, const HeadParams<T>& params, const TempHystConfig& cfg,
                        Pooling pooling = Pooling::TempHyst, ForwardCache<T>* cache = nullptr);

// Accumulates dQ * dQ/dparams into `grads` (same dims as params).
template <typename T>
void backward(const ForwardCache<T>& cache, const HeadParams<T>& params, T dQ, HeadParams<T>& grads);

enum class RankMode {
  Detached,  // exact average ranks, held constant under differentiation
  Soft,      // r_i = 1 + sum_{j != i} sigmoid((p_i - p_j) / temperature)
};

struct LossOptions {
  RankMode rank_mode = RankMode::Detached;
  double epsilon = 1e-12;
  double soft_temperature = 0.1;
};

template <typename T>
struct LossValue {
  T loss{};
  T srcc{};
  T plcc{};
  std::vector<T> grad;  // dL / dpredicted
};

// L = (1 - SRCC) + (1 - PLCC) / 2 over a batch of video scores. Correlation
// denominators are sqrt(Sxx Syy + epsilon).
template <typename T>
LossValue<T> correlation_loss(std::span<const T> predicted, std::span<const T> mos, const LossOptions& options = {});

template <typename T>
struct BatchGradient {
  T loss{};
  T srcc{};
  T plcc{};
  std::vector<T> Q;
  HeadParams<T> grads;
};

// Forward every video, evaluate the batch loss and backpropagate. Per-video
// gradients are computed on up to `threads` workers and summed in video order.
template <typename T>
BatchGradient<T> batch_gradient(std::span<const Tensor<T>* const> fused, std::span<const T> mos,
                                const HeadParams<T>& params, const TempHystConfig& cfg, Pooling pooling,
                                const LossOptions& options, std::size_t threads = 1);

// Loss only (no gradients), shared by finite-difference checks.
template <typename T>
T batch_loss(std::span<const Tensor<T>* const> fused, std::span<const T> mos, const HeadParams<T>& params,
             const TempHystConfig& cfg, Pooling pooling, const LossOptions& options);

// Average ranks (1-based), ties share the mean of their positions.
template <typename T>
std::vector<T> average_ranks(std::span<const T> v);

}  // namespace hvs::head
