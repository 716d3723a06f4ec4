#include "hvs5m/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>

#include "CLI11.hpp"

#include "hvs5m/edge.hpp"
#include "hvs5m/io.hpp"
#include "hvs5m/parallel.hpp"
#include "hvs5m/pipeline.hpp"
#include "hvs5m/report.hpp"
#include "hvs5m/synth.hpp"
#include "hvs5m/train.hpp"

namespace hvs::cli {

namespace fs = std::filesystem;
using pipeline::PipelineConfig;

namespace {

// Options shared by every pipeline command.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::size_t threads = 0;
  CLI::Option* threads_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "config file (key = value)");
  cmd->add_option("--set", c.sets, "override one config key, key=value; repeatable");
  c.threads_opt = cmd->add_option("--threads", c.threads, "worker threads (default: HVS5M_THREADS, then all cores)");
}

struct AblationFlags {
  bool saliency = false, content = false, edge = false, motion = false, fc = false;
};

void add_ablation(CLI::App* cmd, AblationFlags& a) {
  cmd->add_flag("--disable-saliency", a.saliency, "skip the attention multiply");
  cmd->add_flag("--disable-content", a.content, "drop content statistics");
  cmd->add_flag("--disable-edge", a.edge, "drop edge statistics");
  cmd->add_flag("--disable-motion", a.motion, "drop the temporal branch");
  cmd->add_flag("--replace-temphyst-with-fc", a.fc, "mean-pool q_n instead of hysteresis pooling");
}

void apply_ablation(PipelineConfig& cfg, const AblationFlags& a) {
  cfg.ablation.disable_saliency |= a.saliency;
  cfg.ablation.disable_content |= a.content;
  cfg.ablation.disable_edge |= a.edge;
  cfg.ablation.disable_motion |= a.motion;
  cfg.ablation.replace_temphyst_with_fc |= a.fc;
}

// defaults (or base) < config file < --set < named flags
PipelineConfig resolve(const Common& c, PipelineConfig base = {}) {
  if (!c.config.empty()) base = pipeline::load_config(c.config, std::move(base));
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgumentError("--set expects key=value, got '" + kv + "'");
    pipeline::apply_setting(base, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.threads_opt->count() > 0) base.threads = c.threads;
  return base;
}

template <typename V>
void flag_override(CLI::Option* opt, V& target, const V& value) {
  if (opt->count() > 0) target = value;
}

std::string checkpoint_config(const io::Checkpoint& ckpt) { return ckpt.config_text; }

void check_head_fits(const PipelineConfig& cfg, const io::Checkpoint& ckpt) {
  const std::size_t width = cfg.fused_width();
  if (ckpt.params.dims.input != width)
    throw DimensionError("checkpoint parameter fc.weight takes input width " + std::to_string(ckpt.params.dims.input) +
                         " but the configured pipeline produces " + std::to_string(width));
}

std::vector<train::Sample> select(const std::vector<train::Sample>& all, const std::vector<std::string>& ids) {
  std::map<std::string, const train::Sample*> by_id;
  for (const auto& s : all) by_id.emplace(s.id, &s);
  std::vector<train::Sample> out;
  for (const auto& id : ids) out.push_back(*by_id.at(id));
  return out;
}

std::vector<std::string> ids_of(const io::DatasetManifest& m) {
  std::vector<std::string> ids;
  for (const auto& v : m.videos) ids.push_back(v.id);
  return ids;
}

metrics::EvalReport score_set(const train::TrainResult& r, const std::vector<train::Sample>& set,
                              const train::TrainOptions& o) {
  const auto pred = train::predict(r.params, r.standardizer, set, o.temphyst, o.pooling, o.threads);
  std::vector<double> mos;
  for (const auto& s : set) mos.push_back(s.mos);
  return metrics::evaluate(pred, mos);
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    io::write_text_atomic(path, text);
  }
}

// ---------------------------------------------------------------- commands

int cmd_extract_edges(const std::string& in, const std::string& out_dir, const edge::CannyParams& params,
                      bool normalize, std::size_t threads, std::ostream& out) {
  params.validate();
  if (!fs::is_directory(in)) throw IoError("input directory " + in + " does not exist");
  const auto files = io::list_tensor_files(in);
  if (files.empty()) throw IoError("no input frames (*.hvsf) in " + in);
  fs::create_directories(out_dir);
  parallel_for(files.size(), resolve_threads(threads), [&](std::size_t i) {
    TensorF frame;
    try {
      frame = io::read_tensor_as<float>(files[i]);
    } catch (const Error& e) {
      throw IoError(files[i].string() + ": " + e.what());
    }
    if (frame.rank() != 3 || frame.dim(2) != 3)
      throw DimensionError(files[i].string() + ": frame must be (H, W, 3), found " + shape_to_string(frame.shape()));
    const TensorU8 edges = edge::edge_maps(frame, params);
    const fs::path dst = fs::path(out_dir) / files[i].filename();
    if (normalize) {
      TensorF unit = edges.cast<float>();
      for (float& v : unit.data()) v /= 255.0f;
      io::write_tensor(dst, unit);
    } else {
      io::write_tensor(dst, edges);
    }
  });
  out << "wrote " << files.size() << " edge maps to " << out_dir << "\n";
  return 0;
}

int cmd_score(const PipelineConfig& cfg, const io::Checkpoint& ckpt, const std::string& manifest_path,
              const std::string& report_path, report::Format format, const std::string& plot, std::ostream& out) {
  cfg.validate();
  check_head_fits(cfg, ckpt);
  const auto manifest = io::load_manifest(manifest_path);
  const pipeline::FeatureExtractor extractor(cfg);
  const auto features = extractor.extract_all(manifest);
  train::Standardizer st{ckpt.input_mean, ckpt.input_scale};
  std::vector<report::ScoreRow> rows(features.size());
  parallel_for(features.size(), resolve_threads(cfg.threads), [&](std::size_t i) {
    rows[i].id = manifest.videos[i].id;
    rows[i].mos = manifest.videos[i].mos;
    rows[i].trace = head::forward(st.apply(features[i].fused), ckpt.params, ckpt.temphyst, ckpt.pooling);
  });
  write_or_print(report_path, report::scores(rows, format), out);
  if (!plot.empty()) io::write_text_atomic(plot, report::scatter_csv(rows));
  return 0;
}

int cmd_train(const PipelineConfig& cfg, const std::string& manifest_path, const std::string& out_dir,
              std::ostream& out) {
  cfg.validate();
  const auto manifest = io::load_manifest(manifest_path);
  const pipeline::FeatureExtractor extractor(cfg);
  const auto all = pipeline::to_samples(manifest, extractor.extract_all(manifest));
  metrics::SplitSpec spec{cfg.split_train, cfg.split_val, cfg.split_test, cfg.split_seed, ids_of(manifest)};
  const auto split = metrics::split(spec);
  const auto tr = select(all, split.train), va = select(all, split.val), te = select(all, split.test);
  const auto opts = cfg.training_options();
  std::string history;
  const auto result = train::train(tr, va, opts, [&](const train::EpochRecord& rec) {
    const std::string line = report::history_line(rec);
    out << line << "\n" << std::flush;
    history += line + "\n";
  });

  io::Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.temphyst = opts.temphyst;
  ckpt.pooling = opts.pooling;
  ckpt.seed = opts.seed;
  ckpt.epoch = result.best_epoch;
  ckpt.input_mean = result.standardizer.mean;
  ckpt.input_scale = result.standardizer.scale;
  ckpt.config_text = pipeline::to_text(cfg);
  io::write_checkpoint(out_dir, ckpt);
  io::write_text_atomic(fs::path(out_dir) / "history.jsonl", history);
  io::write_text_atomic(fs::path(out_dir) / "history.csv", report::history_csv(result.history));

  std::string splits;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    splits += part == &split.train ? "train:" : part == &split.val ? "val:" : "test:";
    for (const auto& id : *part) splits += " " + id;
    splits += "\n";
  }
  io::write_text_atomic(fs::path(out_dir) / "split.txt", splits);
  if (!te.empty()) {
    const auto test = score_set(result, te, opts);
    report::RunRecord rec{0, cfg.split_seed, opts.seed, result.best_epoch, test};
    io::write_text_atomic(fs::path(out_dir) / "test.txt", report::evaluation({rec}, report::Format::Text));
  }
  return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, const std::optional<io::Checkpoint>& ckpt, const std::string& manifest_path,
                 std::size_t runs, bool fixed, const std::string& report_path, report::Format format,
                 std::ostream& out) {
  cfg.validate();
  const auto manifest = io::load_manifest(manifest_path);
  const pipeline::FeatureExtractor extractor(cfg);
  const auto all = pipeline::to_samples(manifest, extractor.extract_all(manifest));
  std::vector<report::RunRecord> records;
  if (fixed) {
    if (!ckpt) throw InvalidArgumentError("--fixed needs --checkpoint");
    check_head_fits(cfg, *ckpt);
    train::TrainResult r;
    r.params = ckpt->params;
    r.standardizer = {ckpt->input_mean, ckpt->input_scale};
    train::TrainOptions o = cfg.training_options();
    o.temphyst = ckpt->temphyst;
    o.pooling = ckpt->pooling;
    records.push_back({0, cfg.split_seed, ckpt->seed, ckpt->epoch, score_set(r, all, o)});
  } else {
    if (runs == 0) throw InvalidArgumentError("--runs must be >= 1");
    for (std::size_t run = 0; run < runs; ++run) {
      metrics::SplitSpec spec{cfg.split_train, cfg.split_val, cfg.split_test, cfg.split_seed + run, ids_of(manifest)};
      const auto split = metrics::split(spec);
      auto opts = cfg.training_options();
      opts.seed = cfg.train.seed + run;
      const auto result = train::train(select(all, split.train), select(all, split.val), opts);
      records.push_back({run, spec.seed, opts.seed, result.best_epoch, score_set(result, select(all, split.test), opts)});
    }
  }
  write_or_print(report_path, report::evaluation(records, format), out);
  return 0;
}

int cmd_synth(const PipelineConfig& cfg, const synth::Options& o, const std::string& dir, std::ostream& out) {
  cfg.validate();
  const pipeline::FeatureExtractor extractor(cfg);
  const auto d = synth::make_dataset(o, extractor);
  const auto manifest = synth::write_dataset(d, dir);
  out << "wrote " << d.ids.size() << " videos, manifest " << manifest.string() << "\n";
  return 0;
}

std::string error_line(const std::string& kind, const std::string& msg) {
  std::string flat = msg;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  return "error: " + kind + ": " + flat + "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hvs5m: no-reference video quality assessment", "hvs5m"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // extract-edges
  auto* ee = app.add_subcommand("extract-edges", "Canny edge maps for a directory of frames");
  std::string ee_in, ee_out;
  edge::CannyParams ee_params;
  bool ee_normalize = false;
  Common ee_common;
  ee->add_option("--in", ee_in, "directory of (H, W, 3) HVSF frames")->required();
  ee->add_option("--out", ee_out, "output directory")->required();
  auto* o_u = ee->add_option("--u", ee_params.upper, "upper threshold");
  auto* o_l = ee->add_option("--l", ee_params.lower, "lower threshold");
  auto* o_sigma = ee->add_option("--sigma", ee_params.sigma, "Gaussian sigma");
  ee->add_flag("--normalize", ee_normalize, "write f32 maps in {0, 1} instead of u8 {0, 255}");
  add_common(ee, ee_common);

  // score
  auto* sc = app.add_subcommand("score", "Score videos with a trained checkpoint");
  std::string sc_manifest, sc_ckpt, sc_out, sc_format = "text", sc_plot;
  Common sc_common;
  sc->add_option("--manifest", sc_manifest)->required();
  sc->add_option("--checkpoint", sc_ckpt)->required();
  sc->add_option("--out", sc_out, "report path ('-' for stdout)")->required();
  sc->add_option("--format", sc_format, "text or jsonl");
  sc->add_option("--plot", sc_plot, "write id,mos,Q plot data here");
  add_common(sc, sc_common);

  // train
  auto* tr = app.add_subcommand("train", "Train the quality head");
  std::string tr_manifest, tr_out;
  double tr_lr = 0.0;
  std::size_t tr_epochs = 0, tr_batch = 0;
  std::uint64_t tr_seed = 0;
  Common tr_common;
  AblationFlags tr_ablation;
  tr->add_option("--manifest", tr_manifest)->required();
  tr->add_option("--out", tr_out, "checkpoint directory")->required();
  auto* o_lr = tr->add_option("--lr", tr_lr);
  auto* o_epochs = tr->add_option("--epochs", tr_epochs);
  auto* o_batch = tr->add_option("--batch", tr_batch);
  auto* o_seed = tr->add_option("--seed", tr_seed);
  add_common(tr, tr_common);
  add_ablation(tr, tr_ablation);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Repeated train/test protocol, or score a fixed checkpoint");
  std::string ev_manifest, ev_ckpt, ev_out, ev_format = "text";
  std::size_t ev_runs = 10;
  bool ev_fixed = false;
  Common ev_common;
  AblationFlags ev_ablation;
  ev->add_option("--manifest", ev_manifest)->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint whose config seeds the runs");
  ev->add_option("--runs", ev_runs, "independent split/train repetitions");
  ev->add_flag("--fixed", ev_fixed, "score the checkpoint on the whole manifest instead of retraining");
  ev->add_option("--out", ev_out, "report path (default stdout)");
  ev->add_option("--format", ev_format, "text or jsonl");
  add_common(ev, ev_common);
  add_ablation(ev, ev_ablation);

  // synth
  auto* sy = app.add_subcommand("synth", "Write a synthetic dataset with a known score functional");
  std::string sy_out;
  synth::Options sy_opts;
  std::size_t sy_size = 0;
  Common sy_common;
  sy->add_option("--out", sy_out)->required();
  sy->add_option("--videos", sy_opts.videos);
  auto* o_size = sy->add_option("--size", sy_size, "frame height and width");
  sy->add_option("--frames", sy_opts.frames);
  sy->add_option("--seed", sy_opts.seed);
  sy->add_option("--nuisance", sy_opts.nuisance);
  add_common(sy, sy_common);

  // config
  auto* cf = app.add_subcommand("config", "Print the effective configuration");
  Common cf_common;
  add_common(cf, cf_common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_line("usage", e.what());
    return 2;
  }

  try {
    if (ee->parsed()) {
      PipelineConfig cfg = resolve(ee_common);
      edge::CannyParams p = cfg.canny;
      flag_override(o_u, p.upper, ee_params.upper);
      flag_override(o_l, p.lower, ee_params.lower);
      flag_override(o_sigma, p.sigma, ee_params.sigma);
      return cmd_extract_edges(ee_in, ee_out, p, ee_normalize || cfg.normalize_edges, cfg.threads, out);
    }
    if (sc->parsed()) {
      const auto ckpt = io::read_checkpoint(sc_ckpt);
      const PipelineConfig cfg =
          resolve(sc_common, pipeline::parse_config(checkpoint_config(ckpt), sc_ckpt + "/config.txt"));
      return cmd_score(cfg, ckpt, sc_manifest, sc_out, report::parse_format(sc_format), sc_plot, out);
    }
    if (tr->parsed()) {
      PipelineConfig cfg = resolve(tr_common);
      flag_override(o_lr, cfg.train.lr, tr_lr);
      flag_override(o_epochs, cfg.train.epochs, tr_epochs);
      flag_override(o_batch, cfg.train.batch, tr_batch);
      flag_override(o_seed, cfg.train.seed, tr_seed);
      apply_ablation(cfg, tr_ablation);
      return cmd_train(cfg, tr_manifest, tr_out, out);
    }
    if (ev->parsed()) {
      std::optional<io::Checkpoint> ckpt;
      PipelineConfig base;
      if (!ev_ckpt.empty()) {
        ckpt = io::read_checkpoint(ev_ckpt);
        base = pipeline::parse_config(checkpoint_config(*ckpt), ev_ckpt + "/config.txt");
      }
      PipelineConfig cfg = resolve(ev_common, base);
      apply_ablation(cfg, ev_ablation);
      return cmd_evaluate(cfg, ckpt, ev_manifest, ev_runs, ev_fixed, ev_out, report::parse_format(ev_format), out);
    }
    if (sy->parsed()) {
      const PipelineConfig cfg = resolve(sy_common);
      if (o_size->count() > 0) sy_opts.height = sy_opts.width = sy_size;
      return cmd_synth(cfg, sy_opts, sy_out, out);
    }
    if (cf->parsed()) {
      out << pipeline::to_text(resolve(cf_common));
      return 0;
    }
  } catch (const Error& e) {
    err << error_line(e.kind(), e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << error_line("io", e.what());
    return 1;
  } catch (const std::exception& e) {
    err << error_line("internal", e.what());
    return 1;
  }
  return 2;
}

}  // namespace hvs::cli
