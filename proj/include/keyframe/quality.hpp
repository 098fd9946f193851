#pragma once

// Frame quality metric built on the classifier's per-frame probabilities:
//   1. harden each probability vector (keep only its maximum),
//   2. zero frames whose class is not constant over a +-w frame window,
//   3. repeat over every augmentation of the video and average per class,
//   4. quality = top averaged class minus the sum of the others, clamped.

#include <cstddef>
#include <span>
#include <vector>

#include "keyframe/classifier.hpp"
#include "keyframe/core.hpp"
#include "keyframe/transforms.hpp"

namespace keyframe::quality {

using core::ClassLabel;
using core::FeatureVector;
using core::Frame;
using core::ProbVector;
using core::QualityScore;
using core::RawVector;

/// Half-width of the stability neighbourhood in frames; 0 disables the check.
struct StabilityWindow {
  std::size_t frames = 5;
};

struct FrameQuality {
  QualityScore quality;
  ClassLabel selected_class = ClassLabel::NotABrain;
  bool stable_in_original = false;
  RawVector aggregated;
};

using QualitySeries = std::vector<FrameQuality>;

RawVector harden(const ProbVector& p);

/// flag[i] is true iff every frame within [i-w, i+w] (clipped to the
/// sequence) has the same class as frame i. Throws EmptySequence.
std::vector<bool> stability_mask(std::span<const ClassLabel> classes, StabilityWindow window);

/// Hardened vector for stable frames, all-zero vector for unstable ones.
std::vector<RawVector> harden_and_filter(std::span<const ProbVector> series, StabilityWindow window);

/// Per-frame, per-class arithmetic mean over transforms. Throws
/// LengthMismatch when sequences differ in length, EmptySequence for T = 0.
std::vector<RawVector> tta_aggregate(const std::vector<std::vector<RawVector>>& per_transform);

/// clamp(max - sum of the other entries, 0, 1).
QualityScore margin_quality(const RawVector& v);

/// Metric from precomputed probabilities, indexed [transform][frame];
/// transform 0 is the untransformed video.
QualitySeries quality_from_probs(const std::vector<std::vector<ProbVector>>& per_transform, StabilityWindow window);

/// Classifier outputs for every (transform, frame) pair.
struct ClassifiedVideo {
  std::vector<std::vector<ProbVector>> probs;   // [transform][frame]
  std::vector<FeatureVector> identity_features;  // catalogue entry 0
};

/// Runs the classifier over every transformed copy of the video. Work is
/// spread over `workers` threads; results are independent of the count.
ClassifiedVideo classify_video(std::span<const Frame> frames, const classifier::ModelHandle& handle,
                               const transforms::TtaCatalogue& catalogue, std::size_t workers = 1);

QualitySeries compute_quality_series(std::span<const Frame> frames, const classifier::ModelHandle& handle,
                                     const transforms::TtaCatalogue& catalogue, StabilityWindow window,
                                     std::size_t workers = 1);

}  // namespace keyframe::quality
