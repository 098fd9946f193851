#include <optional>

#include "keyframe/parallel.hpp"
#include "keyframe/pipeline.hpp"

namespace keyframe::pipeline {
namespace {

std::vector<FrameRecord> make_records(const std::vector<ProbVector>& identity, const QualitySeries& series) {
  std::vector<FrameRecord> out;
  out.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out.push_back({i, identity[i], series[i], std::nullopt});
  return out;
}

}  // namespace

MetricRun run_metric(const PipelineConfig& cfg, const classifier::ModelHandle& model, std::span<const Frame> frames) {
  const auto catalogue = resolve_catalogue(cfg);
  auto classified = quality::classify_video(frames, model, catalogue, cfg.workers);
  MetricRun run;
  run.series = quality::quality_from_probs(classified.probs, quality::StabilityWindow{cfg.window});
  run.records = make_records(classified.probs.front(), run.series);
  run.identity_features = std::move(classified.identity_features);
  return run;
}

MetricRun run_metric(const PipelineConfig& cfg, std::span<const Frame> frames) {
  if (!cfg.model) throw Error(ErrorCode::InvalidArgument, "no classifier model configured");
  return run_metric(cfg, classifier::open_model(*cfg.model), frames);
}

MetricRun run_metric_only(std::istream& in, std::size_t window) {
  const auto probs = parse_metric_input(in);
  MetricRun run;
  run.series = quality::quality_from_probs(probs, quality::StabilityWindow{window});
  run.records = make_records(probs.front(), run.series);
  return run;
}

std::vector<double> run_gru_scoring(const classifier::ModelHandle& model, const gru::GruHeadModel& head,
                                    std::span<const Frame> frames, std::size_t workers,
                                    std::vector<ClassLabel>* classes) {
  if (frames.empty()) throw Error(ErrorCode::EmptySequence, "video has no frames");
  head.check_architecture();
  std::vector<std::optional<classifier::ClassifierOutput>> slots(frames.size());
  parallel_for(frames.size(), workers, [&](std::size_t i) { slots[i] = model.classify(frames[i]); });
  gru::Sequence seq;
  seq.steps = frames.size();
  seq.dim = core::kFeatureDim;
  seq.values.reserve(seq.steps * seq.dim);
  for (const auto& s : slots) seq.values.insert(seq.values.end(), s->features.values().begin(), s->features.values().end());
  if (classes) {
    classes->clear();
    for (const auto& s : slots) classes->push_back(core::argmax_class(s->probs));
  }
  return gru::forward(head, seq, gru::Mode::Inference);
}

std::vector<VideoPair> build_training_pairs(const PipelineConfig& cfg, const classifier::ModelHandle& model,
                                            const std::vector<std::pair<std::string, std::vector<Frame>>>& videos) {
  std::vector<VideoPair> out;
  out.reserve(videos.size());
  for (const auto& [id, frames] : videos) {
    MetricRun run = run_metric(cfg, model, frames);
    VideoPair vp;
    vp.video_id = id;
    vp.pair.features = gru::Sequence::from_features(run.identity_features);
    vp.pair.targets.reserve(run.series.size());
    for (const auto& fq : run.series) vp.pair.targets.push_back(fq.quality.value());
    out.push_back(std::move(vp));
  }
  return out;
}

}  // namespace keyframe::pipeline
