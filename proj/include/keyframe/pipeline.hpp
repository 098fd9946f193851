#pragma once

// End-to-end orchestration: frame ingestion, metric scoring, GRU scoring,
// training-pair construction and keyframe selection, plus the on-disk
// formats those stages exchange (see docs/formats.md).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "keyframe/classifier.hpp"
#include "keyframe/core.hpp"
#include "keyframe/gru.hpp"
#include "keyframe/quality.hpp"
#include "keyframe/transforms.hpp"

namespace keyframe::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

using core::ClassLabel;
using core::Frame;
using core::ProbVector;
using quality::QualitySeries;

// ---- ingestion --------------------------------------------------------------

/// Decodes one image to a grayscale frame in [0,1]. Colour images are reduced
/// with BT.601 luma weights; 16-bit images are scaled by 1/65535.
Frame decode_image(const std::filesystem::path& path);  // UnreadableFile

/// Every non-hidden regular file in `dir`, lexicographic by file name.
/// Throws NoFrames, InconsistentDimensions, UnreadableFile.
std::vector<Frame> ingest_frames(const std::filesystem::path& dir);

/// Writes frames as 16-bit PNGs named frame_00000.png, ... .
void save_frames(const std::filesystem::path& dir, std::span<const Frame> frames);

/// Deterministic test video: a bright elliptical structure that drifts,
/// fades in and out and changes shape over time on a speckled background.
std::vector<Frame> synthetic_video(std::size_t frames, std::size_t width, std::size_t height, std::uint64_t seed);

// ---- configuration ----------------------------------------------------------

struct KeyframeParams {
  double min_quality = 0.5;
  std::size_t nms_radius = 5;
  std::size_t top_k = 10;
};

struct PipelineConfig {
  std::optional<std::string> model;  // file path or "synthetic:<seed>"
  std::optional<std::filesystem::path> metric_input;
  std::string catalogue = "default";  // "default" or a catalogue file path
  std::size_t window = 5;
  std::optional<std::filesystem::path> gru_weights;
  KeyframeParams keyframes;
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  /// InvalidArgument unless model or metric_input is set, 0 <= min_quality
  /// <= 1, top_k >= 1 and workers >= 1.
  void validate() const;
};

inline constexpr int kConfigFormatVersion = 1;
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const PipelineConfig& cfg);

transforms::TtaCatalogue resolve_catalogue(const PipelineConfig& cfg);

// ---- metric -------------------------------------------------------------------

struct FrameRecord {
  std::size_t frame_index = 0;
  ProbVector probs;  // untransformed pass
  quality::FrameQuality metric;
  std::optional<double> gru_quality;
};

/// One JSON object per line, keys in fixed order:
/// frame_index, p0..p4, v0..v4, stable, selected_class, quality[, gru_quality].
std::string record_to_json(const FrameRecord& r);
void write_records(std::ostream& out, std::span<const FrameRecord> records);
std::vector<FrameRecord> parse_records(std::istream& in);

struct MetricRun {
  QualitySeries series;
  std::vector<FrameRecord> records;
  std::vector<core::FeatureVector> identity_features;
};

/// Classifier + TTA + quality metric over a decoded video.
MetricRun run_metric(const PipelineConfig& cfg, const classifier::ModelHandle& model, std::span<const Frame> frames);
/// Opens cfg.model itself.
MetricRun run_metric(const PipelineConfig& cfg, std::span<const Frame> frames);

/// Metric-only input: one JSON object per line with frame_index,
/// transform_index and p0..p4. Every (transform, frame) pair in the grid
/// must appear exactly once; frame indices run 0..N-1.
std::vector<std::vector<ProbVector>> parse_metric_input(std::istream& in);
MetricRun run_metric_only(std::istream& in, std::size_t window);

// ---- GRU ----------------------------------------------------------------------

/// Untransformed pass only, features fed to the GRU in frame order. When
/// `classes` is given it receives the untransformed argmax class per frame.
std::vector<double> run_gru_scoring(const classifier::ModelHandle& model, const gru::GruHeadModel& head,
                                    std::span<const Frame> frames, std::size_t workers = 1,
                                    std::vector<ClassLabel>* classes = nullptr);

struct VideoPair {
  std::string video_id;
  gru::TrainingPair pair;
};

/// Per video: identity-pass features paired with the metric's qualities.
std::vector<VideoPair> build_training_pairs(const PipelineConfig& cfg, const classifier::ModelHandle& model,
                                            const std::vector<std::pair<std::string, std::vector<Frame>>>& videos);

inline constexpr int kPairsFormatVersion = 1;
void write_pairs(std::ostream& out, std::span<const VideoPair> pairs);
std::vector<VideoPair> read_pairs(std::istream& in);
void save_pairs(const std::filesystem::path& path, std::span<const VideoPair> pairs);
std::vector<VideoPair> load_pairs(const std::filesystem::path& path);

// ---- selection ----------------------------------------------------------------

enum class ScoreSource { Metric, Gru };
std::string_view to_string(ScoreSource s) noexcept;

struct Keyframe {
  std::size_t frame_index = 0;
  double quality = 0.0;
  ClassLabel selected_class = ClassLabel::NotABrain;
  ScoreSource source = ScoreSource::Metric;

  friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

struct KeyframeReport {
  std::vector<Keyframe> keyframes;  // strictly increasing frame_index
  std::size_t frame_count = 0;
  std::size_t candidates = 0;  // local maxima before threshold / NMS
  bool none_above_threshold = false;
  KeyframeParams params;
};

/// Strict local maxima (a plateau counts once, at its first index) with
/// quality >= min_quality, thinned by greedy NMS in descending quality
/// (ties: lower index first) so kept frames are > nms_radius apart, at most
/// top_k, reported in index order. Throws EmptySeries, LengthMismatch.
KeyframeReport select_keyframes(std::span<const double> quality, std::span<const ClassLabel> classes,
                                const KeyframeParams& params, ScoreSource source = ScoreSource::Metric);
KeyframeReport select_keyframes(const QualitySeries& series, const KeyframeParams& params);

/// Report document: format_version, source, keyframes, metadata (frame and
/// candidate counts, flags, config echo, version). Deterministic; run
/// timing is kept out of it so repeated runs compare byte-for-byte.
std::string report_to_json(const KeyframeReport& report, const PipelineConfig& cfg, ScoreSource source);

}  // namespace keyframe::pipeline
