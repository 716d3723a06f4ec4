#include "hvs5m/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hvs5m/errors.hpp"
#include "hvs5m/random.hpp"

namespace hvs::metrics {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("correlation inputs differ in length: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  if (a.size() < 2) throw InvalidArgumentError("correlation needs at least 2 samples");
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = static_cast<double>(i + j + 2) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> srcc(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth);
  if (constant(pred) || constant(truth)) return std::nullopt;
  const auto rp = average_ranks(pred);
  const auto rt = average_ranks(truth);
  return pearson(rp, rt);
}

std::optional<double> plcc(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth);
  if (constant(pred) || constant(truth)) return std::nullopt;
  return pearson(pred, truth);
}

EvalReport evaluate(std::span<const double> pred, std::span<const double> truth) {
  EvalReport r;
  r.n_videos = pred.size();
  const auto s = srcc(pred, truth);
  const auto p = plcc(pred, truth);
  r.degenerate = !s || !p;
  r.srcc = s.value_or(std::numeric_limits<double>::quiet_NaN());
  r.plcc = p.value_or(std::numeric_limits<double>::quiet_NaN());
  return r;
}

Split split(const SplitSpec& spec) {
  const double sum = spec.train + spec.val + spec.test;
  if (spec.train < 0 || spec.val < 0 || spec.test < 0 || std::abs(sum - 1.0) > 1e-9)
    throw InvalidArgumentError("split ratios must be non-negative and sum to 1");
  if (spec.ids.size() < 5)
    throw InvalidArgumentError("split needs at least 5 videos, got " + std::to_string(spec.ids.size()));
  std::vector<std::string> ids = spec.ids;
  {
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) throw InvalidArgumentError("split: duplicate video id '" + *dup + "'");
  }
  Rng rng(spec.seed);
  shuffle(ids, rng);
  const auto n = static_cast<double>(ids.size());
  // Small tolerance so 0.2 * 10 lands on 2 despite binary rounding.
  const auto n_val = static_cast<std::size_t>(std::floor(n * spec.val + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(n * spec.test + 1e-9));
  Split out;
  const auto begin = ids.begin();
  const auto n_train = ids.size() - n_val - n_test;
  out.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(begin + static_cast<std::ptrdiff_t>(n_train), begin + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return out;
}

Aggregate aggregate_runs(std::span<const EvalReport> reports) {
  if (reports.empty()) throw InvalidArgumentError("aggregate_runs needs at least one report");
  Aggregate a;
  a.runs = reports.size();
  std::vector<double> s, p;
  for (const auto& r : reports) {
    if (r.degenerate) {
      ++a.degenerate_runs;
      continue;
    }
    s.push_back(r.srcc);
    p.push_back(r.plcc);
  }
  auto summarize = [](const std::vector<double>& v) {
    Summary out;
    if (v.empty()) {
      out.mean = out.std = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    const double n = static_cast<double>(v.size());
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (double x : v) var += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(var / n);
    return out;
  };
  a.srcc = summarize(s);
  a.plcc = summarize(p);
  return a;
}

}  // namespace hvs::metrics
