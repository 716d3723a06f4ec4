#include "hvs5m/head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hvs5m/parallel.hpp"
#include "hvs5m/random.hpp"

namespace hvs::head {

void TempHystConfig::validate() const {
  if (tau < 1) throw InvalidArgumentError("temphyst tau must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgumentError("temphyst gamma must lie in [0, 1]");
}

template <typename T>
std::array<Shape, HeadParams<T>::kCount> HeadParams<T>::shapes(HeadDims d) {
  return {Shape{d.reduced, d.input}, Shape{d.reduced},    Shape{3 * d.hidden, d.reduced},
          Shape{3 * d.hidden, d.hidden}, Shape{3 * d.hidden}, Shape{3 * d.hidden},
          Shape{1, d.hidden},           Shape{1}};
}

template <typename T>
HeadParams<T> HeadParams<T>::zeros(HeadDims dims) {
  if (dims.input == 0 || dims.reduced == 0 || dims.hidden == 0) throw InvalidArgumentError("head dimensions must be positive");
  HeadParams p;
  p.dims = dims;
  auto t = p.tensors();
  auto s = shapes(dims);
  for (std::size_t i = 0; i < kCount; ++i) *t[i] = Tensor<T>(s[i]);
  return p;
}

template <typename T>
HeadParams<T> HeadParams<T>::init(HeadDims dims, std::uint64_t seed) {
  HeadParams p = zeros(dims);
  Rng rng(seed);
  const double fc_bound = std::sqrt(1.0 / static_cast<double>(dims.input));
  const double rnn_bound = std::sqrt(1.0 / static_cast<double>(dims.hidden));
  auto t = p.tensors();
  for (std::size_t i = 0; i < kCount; ++i) {
    const double bound = i < 2 ? fc_bound : rnn_bound;
    for (T& v : t[i]->data()) v = static_cast<T>(uniform_symmetric(rng, bound));
  }
  return p;
}

template <typename T>
std::array<Tensor<T>*, HeadParams<T>::kCount> HeadParams<T>::tensors() {
  return {&fc_weight, &fc_bias, &gru_weight_ih, &gru_weight_hh, &gru_bias_ih, &gru_bias_hh, &score_weight, &score_bias};
}

template <typename T>
std::array<const Tensor<T>*, HeadParams<T>::kCount> HeadParams<T>::tensors() const {
  return {&fc_weight, &fc_bias, &gru_weight_ih, &gru_weight_hh, &gru_bias_ih, &gru_bias_hh, &score_weight, &score_bias};
}

template <typename T>
bool HeadParams<T>::all_finite() const {
  for (const auto* t : tensors())
    if (!t->all_finite()) return false;
  return true;
}

template <typename T>
QualityTrace<T> temporal_hysteresis(std::span<const T> q, const TempHystConfig& cfg) {
  cfg.validate();
  const std::size_t n = q.size();
  if (n == 0) throw InvalidArgumentError("temporal hysteresis needs at least one score");
  QualityTrace<T> trace;
  trace.q.assign(q.begin(), q.end());
  trace.x.resize(n);
  trace.y.resize(n);
  trace.q_prime.resize(n);
  trace.argmin.resize(n);
  const T gamma = static_cast<T>(cfg.gamma);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      trace.argmin[0] = 0;
    } else {
      const std::size_t lo = i > cfg.tau ? i - cfg.tau : 0;
      std::size_t best = lo;
      for (std::size_t k = lo + 1; k < i; ++k)
        if (q[k] < q[best]) best = k;
      trace.argmin[i] = best;
    }
    trace.x[i] = q[trace.argmin[i]];

    // Softmin weights, shifted by the window minimum for stability.
    const std::size_t hi = std::min(i + cfg.tau, n - 1);
    const T qmin = *std::min_element(q.begin() + static_cast<std::ptrdiff_t>(i), q.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    T denom = 0, num = 0;
    for (std::size_t k = i; k <= hi; ++k) {
      const T e = std::exp(qmin - q[k]);
      denom += e;
      num += q[k] * e;
    }
    trace.y[i] = num / denom;
    trace.q_prime[i] = gamma * trace.x[i] + (T(1) - gamma) * trace.y[i];
  }
  T acc = 0;
  for (T v : trace.q_prime) acc += v;
  trace.Q = acc / static_cast<T>(n);
  return trace;
}

template <typename T>
QualityTrace<T> mean_pooling(std::span<const T> q) {
  if (q.empty()) throw InvalidArgumentError("pooling needs at least one score");
  QualityTrace<T> trace;
  trace.q.assign(q.begin(), q.end());
  trace.q_prime = trace.q;
  T acc = 0;
  for (T v : q) acc += v;
  trace.Q = acc / static_cast<T>(q.size());
  return trace;
}

namespace {

template <typename T>
inline T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

// out[r] = bias[r] + sum_c W[r, c] x[c]
template <typename T>
void affine(const T* w, const T* bias, const T* x, std::size_t rows, std::size_t cols, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* wr = w + r * cols;
    T acc = bias ? bias[r] : T(0);
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

// dW[r, c] += g[r] x[c]
template <typename T>
void outer_accumulate(T* dw, const T* g, const T* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T gr = g[r];
    if (gr == T(0)) continue;
    T* row = dw + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

// dx[c] += sum_r W[r, c] g[r]
template <typename T>
void transpose_accumulate(const T* w, const T* g, std::size_t rows, std::size_t cols, T* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T gr = g[r];
    if (gr == T(0)) continue;
    const T* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += wr[c] * gr;
  }
}

template <typename T>
void check_finite(std::span<const T> v, const char* step) {
  for (T x : v)
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in head ") + step);
}

}  // namespace

template <typename T>
QualityTrace<T> forward(const Tensor<T>& fused, const HeadParams<T>& params, const TempHystConfig& cfg, Pooling pooling,
                        ForwardCache<T>* cache) {
  const HeadDims& d = params.dims;
  if (fused.rank() != 2 || fused.dim(1) != d.input)
    throw DimensionError("head expects fused features (N', " + std::to_string(d.input) + "), got " +
                         shape_to_string(fused.shape()));
  const std::size_t steps = fused.dim(0);
  const std::size_t H = d.hidden, R = d.reduced;

  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.steps = steps;
  c.pooling = pooling;
  c.cfg = cfg;
  c.input.assign(fused.data().begin(), fused.data().end());
  c.reduced.assign(steps * R, T(0));
  c.h.assign((steps + 1) * H, T(0));
  c.r.assign(steps * H, T(0));
  c.z.assign(steps * H, T(0));
  c.n.assign(steps * H, T(0));
  c.hn.assign(steps * H, T(0));

  const T* wih = params.gru_weight_ih.data().data();
  const T* whh = params.gru_weight_hh.data().data();
  const T* bih = params.gru_bias_ih.data().data();
  const T* bhh = params.gru_bias_hh.data().data();
  std::vector<T> gi(3 * H), gh(3 * H), q(steps);

  for (std::size_t t = 0; t < steps; ++t) {
    T* f = c.reduced.data() + t * R;
    affine(params.fc_weight.data().data(), params.fc_bias.data().data(), c.input.data() + t * d.input, R, d.input, f);
    const T* hprev = c.h.data() + t * H;
    T* hcur = c.h.data() + (t + 1) * H;
    affine(wih, bih, f, 3 * H, R, gi.data());
    affine(whh, bhh, hprev, 3 * H, H, gh.data());
    for (std::size_t j = 0; j < H; ++j) {
      const T r = sigmoid(gi[j] + gh[j]);
      const T z = sigmoid(gi[H + j] + gh[H + j]);
      const T hn = gh[2 * H + j];
      const T n = std::tanh(gi[2 * H + j] + r * hn);
      c.r[t * H + j] = r;
      c.z[t * H + j] = z;
      c.n[t * H + j] = n;
      c.hn[t * H + j] = hn;
      hcur[j] = (T(1) - z) * n + z * hprev[j];
    }
    T score = params.score_bias[0];
    for (std::size_t j = 0; j < H; ++j) score += params.score_weight[j] * hcur[j];
    q[t] = score;
  }
  check_finite<T>(c.reduced, "fc reduction");
  check_finite<T>(q, "frame scores");
  c.trace = pooling == Pooling::TempHyst ? temporal_hysteresis<T>(q, cfg) : mean_pooling<T>(q);
  if (!std::isfinite(c.trace.Q)) throw NumericError("non-finite value in head pooling");
  return c.trace;
}

template <typename T>
void backward(const ForwardCache<T>& c, const HeadParams<T>& params, T dQ, HeadParams<T>& g) {
  const HeadDims& d = params.dims;
  if (!(g.dims == d)) throw DimensionError("gradient buffer dims differ from parameters");
  const std::size_t steps = c.steps, H = d.hidden, R = d.reduced;
  const auto& tr = c.trace;

  // dQ -> dq through the pooling stage.
  std::vector<T> dq(steps, T(0));
  const T dqp = dQ / static_cast<T>(steps);
  if (c.pooling == Pooling::Mean) {
    std::fill(dq.begin(), dq.end(), dqp);
  } else {
    const T gamma = static_cast<T>(c.cfg.gamma);
    for (std::size_t i = 0; i < steps; ++i) {
      dq[tr.argmin[i]] += gamma * dqp;
      const std::size_t hi = std::min(i + c.cfg.tau, steps - 1);
      const T qmin = *std::min_element(tr.q.begin() + static_cast<std::ptrdiff_t>(i),
                                       tr.q.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
      T denom = 0;
      for (std::size_t k = i; k <= hi; ++k) denom += std::exp(qmin - tr.q[k]);
      // dy/dq_k = w_k (1 - q_k + y)
      for (std::size_t k = i; k <= hi; ++k) {
        const T w = std::exp(qmin - tr.q[k]) / denom;
        dq[k] += (T(1) - gamma) * dqp * w * (T(1) - tr.q[k] + tr.y[i]);
      }
    }
  }

  const T* wih = params.gru_weight_ih.data().data();
  const T* whh = params.gru_weight_hh.data().data();
  T* dwih = g.gru_weight_ih.data().data();
  T* dwhh = g.gru_weight_hh.data().data();
  T* dbih = g.gru_bias_ih.data().data();
  T* dbhh = g.gru_bias_hh.data().data();

  std::vector<T> dh(H), carry(H, T(0)), dgi(3 * H), dgh(3 * H), df(R);
  for (std::size_t t = steps; t-- > 0;) {
    const T* hprev = c.h.data() + t * H;
    const T* hcur = c.h.data() + (t + 1) * H;
    for (std::size_t j = 0; j < H; ++j) {
      dh[j] = carry[j] + dq[t] * params.score_weight[j];
      g.score_weight[j] += dq[t] * hcur[j];
    }
    g.score_bias[0] += dq[t];

    for (std::size_t j = 0; j < H; ++j) {
      const T r = c.r[t * H + j], z = c.z[t * H + j], n = c.n[t * H + j], hn = c.hn[t * H + j];
      const T dn = dh[j] * (T(1) - z);
      const T dz = dh[j] * (hprev[j] - n);
      const T dan = dn * (T(1) - n * n);
      const T dar = dan * hn * r * (T(1) - r);
      const T daz = dz * z * (T(1) - z);
      dgi[j] = dar;
      dgi[H + j] = daz;
      dgi[2 * H + j] = dan;
      dgh[j] = dar;
      dgh[H + j] = daz;
      dgh[2 * H + j] = dan * r;
      carry[j] = dh[j] * z;
    }
    const T* f = c.reduced.data() + t * R;
    outer_accumulate(dwih, dgi.data(), f, 3 * H, R);
    outer_accumulate(dwhh, dgh.data(), hprev, 3 * H, H);
    for (std::size_t k = 0; k < 3 * H; ++k) {
      dbih[k] += dgi[k];
      dbhh[k] += dgh[k];
    }
    transpose_accumulate(whh, dgh.data(), 3 * H, H, carry.data());

    std::fill(df.begin(), df.end(), T(0));
    transpose_accumulate(wih, dgi.data(), 3 * H, R, df.data());
    outer_accumulate(g.fc_weight.data().data(), df.data(), c.input.data() + t * d.input, R, d.input);
    for (std::size_t k = 0; k < R; ++k) g.fc_bias[k] += df[k];
  }
}

template <typename T>
std::vector<T> average_ranks(std::span<const T> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<T> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const T rank = static_cast<T>(i + j + 2) / T(2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Guarded Pearson correlation and its gradient w.r.t. `a`.
template <typename T>
T guarded_pearson(std::span<const T> a, std::span<const T> b, double eps, std::vector<T>* grad_a) {
  const std::size_t n = a.size();
  T ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<T>(n);
  mb /= static_cast<T>(n);
  T sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const T den = std::sqrt(saa * sbb + static_cast<T>(eps));
  if (grad_a) {
    grad_a->assign(n, T(0));
    const T den3 = den * den * den;
    for (std::size_t i = 0; i < n; ++i)
      (*grad_a)[i] = (b[i] - mb) / den - sab * sbb * (a[i] - ma) / den3;
  }
  return sab / den;
}

}  // namespace

template <typename T>
LossValue<T> correlation_loss(std::span<const T> predicted, std::span<const T> mos, const LossOptions& options) {
  const std::size_t n = predicted.size();
  if (n != mos.size())
    throw DimensionError("loss: " + std::to_string(n) + " predictions vs " + std::to_string(mos.size()) + " scores");
  if (n < 2) throw InvalidArgumentError("loss needs a batch of at least 2 videos");
  for (T v : predicted)
    if (!std::isfinite(v)) throw NumericError("non-finite prediction in loss");

  LossValue<T> out;
  std::vector<T> dplcc;
  out.plcc = guarded_pearson<T>(predicted, mos, options.epsilon, &dplcc);
  const std::vector<T> mos_rank = average_ranks<T>(mos);
  out.grad.assign(n, T(0));

  if (options.rank_mode == RankMode::Detached) {
    const std::vector<T> pred_rank = average_ranks<T>(predicted);
    out.srcc = guarded_pearson<T>(pred_rank, mos_rank, options.epsilon, nullptr);
  } else {
    const T temp = static_cast<T>(options.soft_temperature);
    std::vector<T> soft(n, T(1));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) soft[i] += sigmoid((predicted[i] - predicted[j]) / temp);
    std::vector<T> dsrcc_drank;
    out.srcc = guarded_pearson<T>(soft, mos_rank, options.epsilon, &dsrcc_drank);
    // d soft_i / d p_k: +s'(ik)/t for k = i, -s'(ik)/t for k != i.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        if (i == k) continue;
        const T s = sigmoid((predicted[i] - predicted[k]) / temp);
        const T ds = s * (T(1) - s) / temp;
        out.grad[i] -= dsrcc_drank[i] * ds;
        out.grad[k] += dsrcc_drank[i] * ds;
      }
  }
  for (std::size_t i = 0; i < n; ++i) out.grad[i] -= T(0.5) * dplcc[i];
  out.loss = (T(1) - out.srcc) + (T(1) - out.plcc) / T(2);
  return out;
}

template <typename T>
BatchGradient<T> batch_gradient(std::span<const Tensor<T>* const> fused, std::span<const T> mos,
                                const HeadParams<T>& params, const TempHystConfig& cfg, Pooling pooling,
                                const LossOptions& options, std::size_t threads) {
  const std::size_t b = fused.size();
  if (b != mos.size()) throw DimensionError("batch: " + std::to_string(b) + " videos vs " + std::to_string(mos.size()) + " scores");
  std::vector<ForwardCache<T>> caches(b);
  BatchGradient<T> out;
  out.Q.resize(b);
  parallel_for(b, threads, [&](std::size_t i) { out.Q[i] = forward(*fused[i], params, cfg, pooling, &caches[i]).Q; });

  const LossValue<T> lv = correlation_loss<T>(out.Q, mos, options);
  out.loss = lv.loss;
  out.srcc = lv.srcc;
  out.plcc = lv.plcc;

  std::vector<HeadParams<T>> partial(b);
  parallel_for(b, threads, [&](std::size_t i) {
    partial[i] = HeadParams<T>::zeros(params.dims);
    backward(caches[i], params, lv.grad[i], partial[i]);
  });
  out.grads = HeadParams<T>::zeros(params.dims);
  auto dst = out.grads.tensors();
  for (std::size_t i = 0; i < b; ++i) {
    auto src = partial[i].tensors();
    for (std::size_t k = 0; k < HeadParams<T>::kCount; ++k) {
      auto dd = dst[k]->data();
      auto ss = src[k]->data();
      for (std::size_t e = 0; e < dd.size(); ++e) dd[e] += ss[e];
    }
  }
  for (const auto* t : out.grads.tensors())
    if (!t->all_finite()) throw NumericError("non-finite gradient");
  return out;
}

template <typename T>
T batch_loss(std::span<const Tensor<T>* const> fused, std::span<const T> mos, const HeadParams<T>& params,
             const TempHystConfig& cfg, Pooling pooling, const LossOptions& options) {
  std::vector<T> Q(fused.size());
  for (std::size_t i = 0; i < fused.size(); ++i) Q[i] = forward(*fused[i], params, cfg, pooling).Q;
  return correlation_loss<T>(Q, mos, options).loss;
}

#define HVS_INSTANTIATE(T)                                                                                         \
  template struct HeadParams<T>;                                                                                   \
  template QualityTrace<T> temporal_hysteresis<T>(std::span<const T>, const TempHystConfig&);                      \
  template QualityTrace<T> mean_pooling<T>(std::span<const T>);                                                    \
  template QualityTrace<T> forward<T>(const Tensor<T>&, const HeadParams<T>&, const TempHystConfig&, Pooling,      \
                                      ForwardCache<T>*);                                                           \
  template void backward<T>(const ForwardCache<T>&, const HeadParams<T>&, T, HeadParams<T>&);                      \
  template LossValue<T> correlation_loss<T>(std::span<const T>, std::span<const T>, const LossOptions&);           \
  template BatchGradient<T> batch_gradient<T>(std::span<const Tensor<T>* const>, std::span<const T>,               \
                                              const HeadParams<T>&, const TempHystConfig&, Pooling,                \
                                              const LossOptions&, std::size_t);                                    \
  template T batch_loss<T>(std::span<const Tensor<T>* const>, std::span<const T>, const HeadParams<T>&,            \
                           const TempHystConfig&, Pooling, const LossOptions&);                                    \
  template std::vector<T> average_ranks<T>(std::span<const T>);

HVS_INSTANTIATE(float)
HVS_INSTANTIATE(double)
#undef HVS_INSTANTIATE

}  // namespace hvs::head
