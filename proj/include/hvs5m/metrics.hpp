#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hvs::metrics {

// Exact evaluation correlations. Both return nullopt when either input is
// constant; no epsilon guard is applied.
std::optional<double> srcc(std::span<const double> pred, std::span<const double> truth);
std::optional<double> plcc(std::span<const double> pred, std::span<const double> truth);

std::vector<double> average_ranks(std::span<const double> v);

struct EvalReport {
  double srcc = 0.0;
  double plcc = 0.0;
  std::size_t n_videos = 0;
  bool degenerate = false;  // set when either vector is constant; srcc/plcc are NaN then
};

EvalReport evaluate(std::span<const double> pred, std::span<const double> truth);

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
  std::vector<std::string> ids;
};

struct Split {
  std::vector<std::string> train, val, test;
};

// Seeded shuffle, then val = floor(n * val), test = floor(n * test) and the
// remainder to train.
Split split(const SplitSpec& spec);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct Aggregate {
  Summary srcc, plcc;
  std::size_t runs = 0;
  std::size_t degenerate_runs = 0;  // excluded from the summaries
};

Aggregate aggregate_runs(std::span<const EvalReport> reports);

}  // namespace hvs::metrics
