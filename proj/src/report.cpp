#include "hvs5m/report.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "hvs5m/errors.hpp"

namespace hvs::report {

using nlohmann::json;

Format parse_format(const std::string& text) {
  if (text == "text") return Format::Text;
  if (text == "jsonl") return Format::Jsonl;
  throw InvalidArgumentError("unknown report format '" + text + "' (text or jsonl)");
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json report_json(const metrics::EvalReport& r) {
  return {{"srcc", num_json(r.srcc)}, {"plcc", num_json(r.plcc)}, {"n_videos", r.n_videos}, {"degenerate", r.degenerate}};
}

template <typename T>
json array(const std::vector<T>& v) {
  json a = json::array();
  for (T x : v) a.push_back(static_cast<double>(x));
  return a;
}

}  // namespace

std::string scores(const std::vector<ScoreRow>& rows, Format format) {
  std::string out;
  if (format == Format::Jsonl) {
    for (const auto& r : rows) {
      json j = {{"id", r.id},
                {"mos", r.mos},
                {"Q", static_cast<double>(r.trace.Q)},
                {"q", array(r.trace.q)},
                {"q_prime", array(r.trace.q_prime)}};
      out += j.dump() + "\n";
    }
    return out;
  }
  char line[256];
  out += "id                       mos          Q            steps\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %-12s %-12s %zu\n", r.id.c_str(), num(r.mos).c_str(),
                  num(r.trace.Q).c_str(), r.trace.q.size());
    out += line;
  }
  out += "\nid                       step   q            q_prime\n";
  for (const auto& r : rows)
    for (std::size_t n = 0; n < r.trace.q.size(); ++n) {
      std::snprintf(line, sizeof line, "%-24s %-6zu %-12s %s\n", r.id.c_str(), n, num(r.trace.q[n]).c_str(),
                    num(r.trace.q_prime[n]).c_str());
      out += line;
    }
  return out;
}

std::string scatter_csv(const std::vector<ScoreRow>& rows) {
  std::string out = "id,mos,Q\n";
  for (const auto& r : rows) out += r.id + "," + num(r.mos) + "," + num(r.trace.Q) + "\n";
  return out;
}

std::string history_line(const train::EpochRecord& r) {
  json j = {{"epoch", r.epoch},   {"lr", r.lr}, {"train_loss", num_json(r.train_loss)},
            {"train", report_json(r.train)}, {"val", report_json(r.val)}};
  return j.dump();
}

std::string history_csv(const std::vector<train::EpochRecord>& history) {
  std::string out = "epoch,lr,train_loss,train_srcc,train_plcc,val_srcc,val_plcc\n";
  char lr[32];
  for (const auto& r : history) {
    std::snprintf(lr, sizeof lr, "%.6g", r.lr);
    out += std::to_string(r.epoch) + "," + lr + "," + num(r.train_loss) + "," + num(r.train.srcc) + "," +
           num(r.train.plcc) + "," + num(r.val.srcc) + "," + num(r.val.plcc) + "\n";
  }
  return out;
}

std::string evaluation(const std::vector<RunRecord>& runs, Format format) {
  std::vector<metrics::EvalReport> reports;
  for (const auto& r : runs) reports.push_back(r.report);
  const bool several = runs.size() > 1;
  std::string out;
  if (format == Format::Jsonl) {
    for (const auto& r : runs) {
      json j = report_json(r.report);
      j["run"] = r.run;
      j["split_seed"] = r.split_seed;
      j["train_seed"] = r.train_seed;
      j["best_epoch"] = r.best_epoch;
      out += j.dump() + "\n";
    }
    if (several) {
      const auto a = metrics::aggregate_runs(reports);
      json j = {{"aggregate",
                 {{"runs", a.runs},
                  {"degenerate_runs", a.degenerate_runs},
                  {"srcc_mean", num_json(a.srcc.mean)},
                  {"srcc_std", num_json(a.srcc.std)},
                  {"plcc_mean", num_json(a.plcc.mean)},
                  {"plcc_std", num_json(a.plcc.std)}}}};
      out += j.dump() + "\n";
    }
    return out;
  }
  char line[256];
  out += "run  split_seed  train_seed  n_test  srcc       plcc\n";
  for (const auto& r : runs) {
    std::snprintf(line, sizeof line, "%-4zu %-11llu %-11llu %-7zu %-10s %s%s\n", r.run,
                  static_cast<unsigned long long>(r.split_seed), static_cast<unsigned long long>(r.train_seed),
                  r.report.n_videos, num(r.report.srcc).c_str(), num(r.report.plcc).c_str(),
                  r.report.degenerate ? "  (degenerate)" : "");
    out += line;
  }
  if (several) {
    const auto a = metrics::aggregate_runs(reports);
    std::snprintf(line, sizeof line, "mean +- std over %zu runs: srcc %s +- %s  plcc %s +- %s\n",
                  a.runs - a.degenerate_runs, num(a.srcc.mean).c_str(), num(a.srcc.std).c_str(),
                  num(a.plcc.mean).c_str(), num(a.plcc.std).c_str());
    out += line;
  }
  return out;
}

}  // namespace hvs::report
