// keyframe: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "keyframe/dataset.hpp"
#include "keyframe/gru.hpp"
#include "keyframe/pipeline.hpp"
#include "keyframe/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace keyframe;
using nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitModel = 3;

// Failures while loading or running a model (classifier or GRU head).
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Fn>
auto model_step(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw ModelError(e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::string records_text(std::span<const pipeline::FrameRecord> records) {
  std::ostringstream ss;
  pipeline::write_records(ss, records);
  return ss.str();
}

struct SelectOptions {
  std::optional<double> min_quality;
  std::optional<std::size_t> nms_radius;
  std::optional<std::size_t> top_k;

  void add(CLI::App* app) {
    app->add_option("--min-quality", min_quality, "Keyframe quality threshold in [0,1] (default 0.5)");
    app->add_option("--nms-radius", nms_radius, "Minimum keyframe spacing in frames (default 5)");
    app->add_option("--top-k", top_k, "Maximum number of keyframes (default 10)");
  }
  void apply(pipeline::KeyframeParams& p) const {
    if (min_quality) p.min_quality = *min_quality;
    if (nms_radius) p.nms_radius = *nms_radius;
    if (top_k) p.top_k = *top_k;
  }
};

// Options shared by the pipeline subcommands; command-line values override
// a --config file.
struct PipelineOptions {
  std::optional<fs::path> config;
  std::optional<std::string> model;
  std::optional<std::string> catalogue;
  std::optional<std::size_t> window;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> gru_weights;
  SelectOptions select;

  void add(CLI::App* app, bool with_model) {
    app->add_option("--config", config, "Pipeline config JSON")->check(CLI::ExistingFile);
    if (with_model) {
      app->add_option("--model", model, "ONNX classifier path or synthetic:<seed>");
      app->add_option("--tta-catalogue,--catalogue", catalogue, "Augmentation catalogue JSON ('default' for the built-in 14)");
      app->add_option("--workers", workers, "Classifier threads (default 1)");
    }
    app->add_option("--window", window, "Stability half-window in frames (default 5)");
    app->add_option("--seed", seed, "Seed for any randomized step");
    select.add(app);
  }

  pipeline::PipelineConfig build(bool need_model) const {
    pipeline::PipelineConfig c;
    if (config) c = pipeline::load_config(*config);
    if (model) c.model = *model;
    if (catalogue) c.catalogue = *catalogue;
    if (window) c.window = *window;
    if (workers) c.workers = *workers;
    if (seed) c.seed = *seed;
    if (gru_weights) c.gru_weights = *gru_weights;
    select.apply(c.keyframes);
    if (need_model && !c.model) throw ModelError("no classifier given: pass --model <file.onnx|synthetic:SEED>");
    return c;
  }
};

void write_run_info(const fs::path& out_dir, const pipeline::PipelineConfig& cfg, double seconds) {
  ordered_json j;
  j["version"] = std::string(pipeline::kVersion);
  j["workers"] = cfg.workers;
  j["isa"] = std::string(simd::isa_name(simd::active_isa()));
  j["elapsed_seconds"] = seconds;
  write_file(out_dir / "run.json", j.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- subcommands ----------------------------------------------------------------

int cmd_score(const PipelineOptions& opts, const fs::path& frames_dir, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = opts.build(true);
  cfg.validate();
  const auto frames = pipeline::ingest_frames(frames_dir);
  const auto model = model_step([&] { return classifier::open_model(*cfg.model); });
  auto run = model_step([&] { return pipeline::run_metric(cfg, model, frames); });
  if (cfg.gru_weights) {
    const auto head = model_step([&] { return gru::load_weights(*cfg.gru_weights); });
    const auto scores = model_step([&] { return pipeline::run_gru_scoring(model, head, frames, cfg.workers); });
    for (std::size_t i = 0; i < scores.size(); ++i) run.records[i].gru_quality = scores[i];
  }
  const auto report = pipeline::select_keyframes(run.series, cfg.keyframes);
  fs::create_directories(out_dir);
  write_file(out_dir / "records.jsonl", records_text(run.records));
  write_file(out_dir / "keyframes.json", pipeline::report_to_json(report, cfg, pipeline::ScoreSource::Metric));
  write_run_info(out_dir, cfg, seconds_since(t0));
  spdlog::info("{} frames scored, {} keyframe(s) selected", frames.size(), report.keyframes.size());
  return 0;
}

int cmd_metric_only(const PipelineOptions& opts, const fs::path& input, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = opts.build(false);
  cfg.metric_input = input;
  cfg.validate();
  std::ifstream in(input, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + input.string());
  const auto run = pipeline::run_metric_only(in, cfg.window);
  const auto report = pipeline::select_keyframes(run.series, cfg.keyframes);
  fs::create_directories(out_dir);
  write_file(out_dir / "records.jsonl", records_text(run.records));
  write_file(out_dir / "keyframes.json", pipeline::report_to_json(report, cfg, pipeline::ScoreSource::Metric));
  write_run_info(out_dir, cfg, seconds_since(t0));
  return 0;
}

int cmd_gru_score(const PipelineOptions& opts, const fs::path& frames_dir, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = opts.build(true);
  if (!cfg.gru_weights) {
    throw ModelError("no GRU weights given: pass --gru-weights <weights.json> (train one with 'keyframe gru-train')");
  }
  cfg.validate();
  const auto frames = pipeline::ingest_frames(frames_dir);
  const auto model = model_step([&] { return classifier::open_model(*cfg.model); });
  const auto head = model_step([&] { return gru::load_weights(*cfg.gru_weights); });
  std::vector<core::ClassLabel> classes;
  const auto scores = model_step([&] { return pipeline::run_gru_scoring(model, head, frames, cfg.workers, &classes); });

  std::string lines;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ordered_json j;
    j["frame_index"] = i;
    j["selected_class"] = std::string(core::label_name(classes[i]));
    j["gru_quality"] = scores[i];
    lines += j.dump() + "\n";
  }
  const auto report = pipeline::select_keyframes(scores, classes, cfg.keyframes, pipeline::ScoreSource::Gru);
  fs::create_directories(out_dir);
  write_file(out_dir / "gru_scores.jsonl", lines);
  write_file(out_dir / "keyframes.json", pipeline::report_to_json(report, cfg, pipeline::ScoreSource::Gru));
  write_run_info(out_dir, cfg, seconds_since(t0));
  return 0;
}

int cmd_build_pairs(const PipelineOptions& opts, const fs::path& videos_dir, const fs::path& out) {
  auto cfg = opts.build(true);
  cfg.validate();
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(videos_dir)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  if (dirs.empty()) throw Error(ErrorCode::NoFrames, "no video sub-directories in " + videos_dir.string());
  std::sort(dirs.begin(), dirs.end());
  std::vector<std::pair<std::string, std::vector<core::Frame>>> videos;
  for (const auto& d : dirs) videos.emplace_back(d.filename().string(), pipeline::ingest_frames(d));
  const auto model = model_step([&] { return classifier::open_model(*cfg.model); });
  const auto pairs = model_step([&] { return pipeline::build_training_pairs(cfg, model, videos); });
  pipeline::save_pairs(out, pairs);
  spdlog::info("wrote {} training pair(s) to {}", pairs.size(), out.string());
  return 0;
}

struct GruTrainOptions {
  fs::path pairs;
  std::optional<fs::path> val_pairs;
  double val_fraction = 0.2;
  std::size_t hidden = gru::kDefaultHidden;
  gru::TrainConfig train;
  std::string optimizer = "sgd";
  fs::path out;
  std::optional<fs::path> history;
};

int cmd_gru_train(GruTrainOptions o) {
  auto all = pipeline::load_pairs(o.pairs);
  std::vector<gru::TrainingPair> train, val;
  if (o.val_pairs) {
    for (auto& p : all) train.push_back(std::move(p.pair));
    for (auto& p : pipeline::load_pairs(*o.val_pairs)) val.push_back(std::move(p.pair));
  } else {
    if (!(o.val_fraction > 0.0 && o.val_fraction < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "--val-fraction must be in (0,1)");
    }
    // Whole videos go to one side; seeded order.
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    core::Rng rng(core::mix_seed(o.train.seed, 0x76616c));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(o.val_fraction * static_cast<double>(all.size()))));
    if (all.size() < 2) throw Error(ErrorCode::EmptyDataset, "need at least two videos to hold one out for validation");
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val : train).push_back(std::move(all[order[i]].pair));
  }
  if (o.optimizer == "sgd") {
    o.train.optimizer = gru::Optimizer::Sgd;
  } else if (o.optimizer == "adam") {
    o.train.optimizer = gru::Optimizer::Adam;
  } else {
    throw CLI::ValidationError("--optimizer", "must be 'sgd' or 'adam'");
  }
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "no training sequences");
  const std::size_t dim = train.front().features.dim;
  auto model = dim == gru::kInputDim ? gru::GruHeadModel::create(o.hidden, o.train.seed)
                                     : gru::GruHeadModel::custom(dim, o.hidden, gru::kDropout1, gru::kDropout2,
                                                                 o.train.seed);
  const auto result = gru::train(std::move(model), train, val, o.train);
  gru::save_weights(result.model, o.out);

  ordered_json h;
  h["best_epoch"] = result.history.best_epoch;
  h["stop_reason"] = std::string(gru::to_string(result.history.stop_reason));
  h["epochs"] = ordered_json::array();
  for (const auto& e : result.history.epochs) h["epochs"].push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  if (o.history) write_file(*o.history, h.dump(2) + "\n");
  const auto& best = result.history.epochs[result.history.best_epoch];
  spdlog::info("trained {} epoch(s), best epoch {} with validation MSE {:.6f} ({})", result.history.epochs.size(),
               result.history.best_epoch + 1, best.val_loss, gru::to_string(result.history.stop_reason));
  return 0;
}

int cmd_select(const fs::path& records_path, const std::string& use, const SelectOptions& sel,
               const std::optional<fs::path>& out) {
  std::ifstream in(records_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + records_path.string());
  const auto records = pipeline::parse_records(in);
  if (records.empty()) throw Error(ErrorCode::EmptySeries, records_path.string() + " has no records");
  std::vector<double> q;
  std::vector<core::ClassLabel> classes;
  const bool gru_source = use == "gru";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.frame_index != i) throw Error(ErrorCode::InvalidArgument, "records must be in frame order starting at 0");
    if (gru_source && !r.gru_quality) throw Error(ErrorCode::InvalidArgument, "record " + std::to_string(i) + " has no gru_quality");
    q.push_back(gru_source ? *r.gru_quality : r.metric.quality.value());
    classes.push_back(r.metric.selected_class);
  }
  pipeline::PipelineConfig cfg;
  cfg.metric_input = records_path;
  sel.apply(cfg.keyframes);
  cfg.validate();
  const auto source = gru_source ? pipeline::ScoreSource::Gru : pipeline::ScoreSource::Metric;
  const auto report = pipeline::select_keyframes(q, classes, cfg.keyframes, source);
  const auto text = pipeline::report_to_json(report, cfg, source);
  if (out) {
    write_file(*out, text);
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_split(const fs::path& manifest, double fraction, std::uint64_t seed, const fs::path& out_dir) {
  const auto m = dataset::load_manifest(manifest);
  const auto r = dataset::patient_disjoint_split(m, fraction, seed);
  fs::create_directories(out_dir);
  dataset::save_manifest(r.train, out_dir / "train.csv");
  dataset::save_manifest(r.val, out_dir / "val.csv");
  ordered_json j;
  j["train_images"] = r.train.size();
  j["val_images"] = r.val.size();
  j["train_patients"] = r.train_patients;
  j["val_patients"] = r.val_patients;
  j["achieved_fraction"] = r.achieved_fraction;
  j["degenerate"] = r.degenerate;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_sample_epoch(const fs::path& manifest, std::uint64_t epoch, std::uint64_t seed, std::size_t cap,
                     const std::optional<fs::path>& out) {
  const auto sampled = dataset::epoch_undersample(dataset::load_manifest(manifest), epoch, seed, cap);
  const auto text = dataset::serialize_manifest(sampled);
  if (out) {
    write_file(*out, text);
  } else {
    std::cout << text;
  }
  return 0;
}

ordered_json counts_json(const dataset::ClassCounts& c) {
  return {{"images", c.images}, {"patients", c.patients}, {"train_images", c.train_images}};
}

ordered_json moments_json(const dataset::Moments& m) {
  return {{"min", dataset::round2(m.min)},
          {"max", dataset::round2(m.max)},
          {"mean", dataset::round2(m.mean)},
          {"std", dataset::round2(m.std)}};
}

int cmd_stats(const std::optional<fs::path>& manifest, const std::optional<fs::path>& videos, bool cnn_template) {
  if (cnn_template) {
    std::cout << dataset::cnn_template_json();
    return 0;
  }
  if (!manifest && !videos) throw CLI::ValidationError("stats", "pass --manifest and/or --videos");
  ordered_json j;
  if (manifest) {
    const auto s = dataset::manifest_stats(dataset::load_manifest(*manifest));
    ordered_json per;
    for (auto c : core::kAllClasses) per[std::string(core::label_name(c))] = counts_json(s[c]);
    j["manifest"] = {{"classes", per}, {"brain", counts_json(s.brain)}, {"total", counts_json(s.total)}};
  }
  if (videos) {
    const auto list = dataset::load_video_list(*videos);
    const auto s = dataset::video_stats(list);
    j["videos"] = {{"count", s.count}, {"duration_s", moments_json(s.duration)}, {"fps", moments_json(s.fps)}};
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("keyframe"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Keyframe detection for fetal-brain ultrasound videos"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  PipelineOptions score_opts;
  fs::path frames_dir, out_dir;
  auto* score = app.add_subcommand("score", "Classifier + augmentation metric over a frame directory");
  score->add_option("--frames", frames_dir, "Directory of frame images")->required()->check(CLI::ExistingDirectory);
  score->add_option("--out", out_dir, "Output directory")->required();
  score->add_option("--gru-weights", score_opts.gru_weights, "Also score frames with this GRU head");
  score_opts.add(score, true);

  PipelineOptions metric_opts;
  fs::path metric_input, metric_out;
  auto* metric = app.add_subcommand("metric-only", "Quality metric from precomputed probabilities");
  metric->add_option("--input", metric_input, "JSONL: frame_index, transform_index, p0..p4")
      ->required()
      ->check(CLI::ExistingFile);
  metric->add_option("--out", metric_out, "Output directory")->required();
  metric_opts.add(metric, false);

  PipelineOptions gru_opts;
  fs::path gru_frames, gru_out;
  auto* gru_score = app.add_subcommand("gru-score", "Score frames with a trained GRU head");
  gru_score->add_option("--frames", gru_frames, "Directory of frame images")->required()->check(CLI::ExistingDirectory);
  gru_score->add_option("--out", gru_out, "Output directory")->required();
  gru_score->add_option("--gru-weights", gru_opts.gru_weights, "GRU weights JSON");
  gru_opts.add(gru_score, true);

  GruTrainOptions train_opts;
  auto* gru_train = app.add_subcommand("gru-train", "Train the GRU head on a pairs file");
  gru_train->add_option("--pairs", train_opts.pairs, "Pairs file from build-pairs")->required()->check(CLI::ExistingFile);
  gru_train->add_option("--val-pairs", train_opts.val_pairs, "Separate validation pairs file")->check(CLI::ExistingFile);
  gru_train->add_option("--val-fraction", train_opts.val_fraction, "Held-out share of videos without --val-pairs");
  gru_train->add_option("--hidden", train_opts.hidden, "Hidden units per GRU layer")->check(CLI::PositiveNumber);
  gru_train->add_option("--lr", train_opts.train.learning_rate, "Learning rate");
  gru_train->add_option("--weight-decay", train_opts.train.weight_decay, "Decoupled weight decay");
  gru_train->add_option("--epochs", train_opts.train.max_epochs, "Maximum epochs");
  gru_train->add_option("--patience", train_opts.train.early_stop_patience, "Early-stopping patience in epochs");
  gru_train->add_option("--momentum", train_opts.train.momentum, "SGD momentum (0 = plain SGD)");
  gru_train->add_option("--optimizer", train_opts.optimizer, "sgd or adam");
  gru_train->add_option("--seed", train_opts.train.seed, "Seed for init, shuffling and dropout");
  gru_train->add_option("--out", train_opts.out, "Weights output path")->required();
  gru_train->add_option("--history", train_opts.history, "Write per-epoch losses as JSON");

  PipelineOptions pairs_opts;
  fs::path videos_dir, pairs_out;
  auto* build_pairs = app.add_subcommand("build-pairs", "Features + metric targets for GRU training");
  build_pairs->add_option("--videos", videos_dir, "Directory with one frame sub-directory per video")
      ->required()
      ->check(CLI::ExistingDirectory);
  build_pairs->add_option("--out", pairs_out, "Pairs file to write")->required();
  pairs_opts.add(build_pairs, true);

  fs::path records_path;
  std::string use = "metric";
  SelectOptions select_opts;
  std::optional<fs::path> select_out;
  auto* select = app.add_subcommand("select", "Keyframe selection over an existing records file");
  select->add_option("--records", records_path, "records.jsonl from score")->required()->check(CLI::ExistingFile);
  select->add_option("--use", use, "Score column: metric or gru")->check(CLI::IsMember({"metric", "gru"}));
  select->add_option("--out", select_out, "Report path (default stdout)");
  select_opts.add(select);

  fs::path manifest_path, split_out;
  double fraction = 0.8;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split-dataset", "Patient-disjoint train/validation split");
  split->add_option("--manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  split->add_option("--train-fraction", fraction, "Target share of images in train");
  split->add_option("--seed", split_seed, "Shuffle seed");
  split->add_option("--out", split_out, "Directory for train.csv and val.csv")->required();

  fs::path sample_manifest;
  std::uint64_t epoch = 0, sample_seed = 0;
  std::size_t cap = dataset::kNotABrainCap;
  std::optional<fs::path> sample_out;
  auto* sample = app.add_subcommand("sample-epoch", "Per-epoch not-a-brain undersampling of a training manifest");
  sample->add_option("--manifest", sample_manifest, "Training manifest CSV")->required()->check(CLI::ExistingFile);
  sample->add_option("--epoch", epoch, "Epoch number")->required();
  sample->add_option("--seed", sample_seed, "Run seed");
  sample->add_option("--cap", cap, "not_a_brain entries per epoch")->check(CLI::PositiveNumber);
  sample->add_option("--out", sample_out, "Output manifest (default stdout)");

  std::optional<fs::path> stats_manifest, stats_videos;
  auto* stats = app.add_subcommand("stats", "Manifest and video-list statistics");
  stats->add_option("--manifest", stats_manifest, "Manifest CSV")->check(CLI::ExistingFile);
  stats->add_option("--videos", stats_videos, "Video list CSV")->check(CLI::ExistingFile);
  bool cnn_template = false;
  stats->add_flag("--cnn-template", cnn_template, "Print the classifier-training constants as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    const auto used = app.get_subcommands();
    std::cerr << "error: " << e.what() << "\n\n" << (used.empty() ? app.help() : used.front()->help());
    return kExitUsage;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*score) return cmd_score(score_opts, frames_dir, out_dir);
    if (*metric) return cmd_metric_only(metric_opts, metric_input, metric_out);
    if (*gru_score) return cmd_gru_score(gru_opts, gru_frames, gru_out);
    if (*gru_train) return cmd_gru_train(train_opts);
    if (*build_pairs) return cmd_build_pairs(pairs_opts, videos_dir, pairs_out);
    if (*select) return cmd_select(records_path, use, select_opts, select_out);
    if (*split) return cmd_split(manifest_path, fraction, split_seed, split_out);
    if (*sample) return cmd_sample_epoch(sample_manifest, epoch, sample_seed, cap, sample_out);
    if (*stats) return cmd_stats(stats_manifest, stats_videos, cnn_template);
  } catch (const CLI::ParseError& e) {
    spdlog::error("{}", e.what());
    std::cerr << app.help();
    return kExitUsage;
  } catch (const ModelError& e) {
    spdlog::error("{}", e.what());
    return kExitModel;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}
