#include "hvs5m/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hvs5m/parallel.hpp"
#include "hvs5m/random.hpp"

namespace hvs::train {

Standardizer Standardizer::fit(std::span<const Sample> samples) {
  if (samples.empty()) throw InvalidArgumentError("cannot fit a standardizer on zero samples");
  const std::size_t width = samples.front().fused.dim(1);
  std::vector<double> sum(width, 0.0), sq(width, 0.0);
  std::size_t rows = 0;
  for (const auto& s : samples) {
    if (s.fused.rank() != 2 || s.fused.dim(1) != width)
      throw DimensionError("sample " + s.id + " has fused shape " + shape_to_string(s.fused.shape()));
    const auto d = s.fused.data();
    for (std::size_t r = 0; r < s.fused.dim(0); ++r)
      for (std::size_t c = 0; c < width; ++c) sum[c] += d[r * width + c];
    rows += s.fused.dim(0);
  }
  Standardizer out;
  out.mean.resize(width);
  out.scale.resize(width);
  for (std::size_t c = 0; c < width; ++c) out.mean[c] = static_cast<float>(sum[c] / static_cast<double>(rows));
  for (const auto& s : samples) {
    const auto d = s.fused.data();
    for (std::size_t r = 0; r < s.fused.dim(0); ++r)
      for (std::size_t c = 0; c < width; ++c) {
        const double v = d[r * width + c] - static_cast<double>(out.mean[c]);
        sq[c] += v * v;
      }
  }
  for (std::size_t c = 0; c < width; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(rows));
    out.scale[c] = sd > 1e-6 * (1.0 + std::abs(static_cast<double>(out.mean[c]))) ? static_cast<float>(1.0 / sd) : 1.0f;
  }
  return out;
}

TensorF Standardizer::apply(const TensorF& fused) const {
  if (empty()) return fused;
  if (fused.rank() != 2 || fused.dim(1) != mean.size())
    throw DimensionError("standardizer width " + std::to_string(mean.size()) + " does not match fused " +
                         shape_to_string(fused.shape()));
  TensorF out(fused.shape());
  const auto src = fused.data();
  auto dst = out.data();
  const std::size_t w = mean.size();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - mean[i % w]) * scale[i % w];
  return out;
}

double learning_rate(const TrainOptions& o, std::size_t epoch) {
  const std::size_t every = std::max<std::size_t>(o.decay_every, 1);
  return o.lr * std::pow(o.decay, static_cast<double>(epoch / every));
}

Adam::Adam(const head::HeadParams<float>& like, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto* t : like.tensors()) {
    m_.emplace_back(t->size(), 0.0f);
    v_.emplace_back(t->size(), 0.0f);
  }
}

void Adam::step(head::HeadParams<float>& params, const head::HeadParams<float>& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const auto step_size = static_cast<float>(lr / c1);
  const auto inv_c2 = static_cast<float>(1.0 / c2);
  const auto eps = static_cast<float>(eps_);
  auto p = params.tensors();
  auto g = grads.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto pd = p[k]->data();
    auto gd = g[k]->data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < pd.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * gd[i];
      v[i] = b2 * v[i] + (1.0f - b2) * gd[i] * gd[i];
      pd[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

std::vector<double> predict(const head::HeadParams<float>& params, const Standardizer& standardizer,
                            std::span<const Sample> samples, const head::TempHystConfig& cfg, head::Pooling pooling,
                            std::size_t threads) {
  std::vector<double> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    out[i] = head::forward(standardizer.apply(samples[i].fused), params, cfg, pooling).Q;
  });
  return out;
}

namespace {

metrics::EvalReport report_on(const head::HeadParams<float>& params, std::span<const Sample> samples,
                              const TrainOptions& o) {
  metrics::EvalReport r;
  r.n_videos = samples.size();
  if (samples.size() < 2) {
    r.degenerate = true;
    r.srcc = r.plcc = std::nan("");
    return r;
  }
  // Samples are already standardised by the caller.
  const auto pred = predict(params, Standardizer{}, samples, o.temphyst, o.pooling, o.threads);
  std::vector<double> mos(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) mos[i] = samples[i].mos;
  return metrics::evaluate(pred, mos);
}

}  // namespace

TrainResult train(std::span<const Sample> train_set, std::span<const Sample> val_set, const TrainOptions& o,
                  const EpochCallback& on_epoch) {
  if (train_set.size() < 2) throw InvalidArgumentError("training needs at least 2 videos (the loss correlates a batch)");
  if (o.batch < 2) throw InvalidArgumentError("batch size must be >= 2");
  o.temphyst.validate();

  TrainResult result;
  result.standardizer = o.standardize ? Standardizer::fit(train_set) : Standardizer{};
  std::vector<Sample> tr, va;
  for (const auto& s : train_set) tr.push_back({s.id, result.standardizer.apply(s.fused), s.mos});
  for (const auto& s : val_set) va.push_back({s.id, result.standardizer.apply(s.fused), s.mos});

  const head::HeadDims dims{tr.front().fused.dim(1), o.reduced, o.hidden};
  head::HeadParams<float> params = head::HeadParams<float>::init(dims, o.seed);
  Adam adam(params, o.beta1, o.beta2, o.adam_eps);
  Rng rng(o.seed ^ 0x9e3779b97f4a7c15ULL);

  result.params = params;
  double best_primary = -std::numeric_limits<double>::infinity();
  double best_secondary = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t step = 0;

  std::vector<std::size_t> order(tr.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < o.epochs; ++epoch) {
    const double lr = learning_rate(o, epoch);
    shuffle(order, rng);
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t b = 0; b < order.size(); b += o.batch) batches.emplace_back(b, std::min(order.size(), b + o.batch));
    // A trailing singleton cannot be correlated; fold it into the previous batch.
    if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
      batches.pop_back();
      batches.back().second = order.size();
    }

    double loss_sum = 0.0;
    for (const auto& [b0, b1] : batches) {
      std::vector<const TensorF*> fused;
      std::vector<float> mos;
      for (std::size_t i = b0; i < b1; ++i) {
        fused.push_back(&tr[order[i]].fused);
        mos.push_back(static_cast<float>(tr[order[i]].mos));
      }
      head::BatchGradient<float> g;
      try {
        g = head::batch_gradient<float>(fused, mos, params, o.temphyst, o.pooling, o.loss, o.threads);
      } catch (const NumericError& e) {
        throw TrainingDivergedError(epoch, step, e.what());
      }
      if (!std::isfinite(g.loss)) throw TrainingDivergedError(epoch, step, "loss is not finite");
      adam.step(params, g.grads, lr);
      if (!params.all_finite()) throw TrainingDivergedError(epoch, step, "parameters became non-finite");
      loss_sum += g.loss;
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(batches.size());
    rec.train = report_on(params, tr, o);
    rec.val = report_on(params, va, o);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const metrics::EvalReport& sel = rec.val.degenerate ? rec.train : rec.val;
    const double primary = sel.degenerate ? -2.0 : sel.srcc;
    const double secondary = sel.degenerate ? -2.0 : sel.plcc;
    if (primary > best_primary || (primary == best_primary && secondary > best_secondary)) {
      best_primary = primary;
      best_secondary = secondary;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (o.patience > 0 && ++since_best >= o.patience) {
      break;
    }
  }
  return result;
}

}  // namespace hvs::train
