#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hvs5m/head.hpp"
#include "hvs5m/metrics.hpp"
#include "hvs5m/train.hpp"

namespace hvs::report {

enum class Format { Text, Jsonl };
Format parse_format(const std::string& text);

struct ScoreRow {
  std::string id;
  double mos = 0.0;
  head::QualityTrace<float> trace;
};

// Text: a per-video table followed by the per-step trace.
std::string scores(const std::vector<ScoreRow>& rows, Format format);
// Plot data: id,mos,Q
std::string scatter_csv(const std::vector<ScoreRow>& rows);

std::string history_line(const train::EpochRecord& record);  // one JSON object, no newline
// Plot data: epoch,lr,train_loss,train_srcc,train_plcc,val_srcc,val_plcc
std::string history_csv(const std::vector<train::EpochRecord>& history);

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t split_seed = 0, train_seed = 0;
  std::size_t best_epoch = 0;
  metrics::EvalReport report;
};

// A single run prints just its report; several runs add the mean and std.
std::string evaluation(const std::vector<RunRecord>& runs, Format format);

}  // namespace hvs::report
