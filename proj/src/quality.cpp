#include "keyframe/quality.hpp"

#include <algorithm>
#include <optional>

#include "keyframe/parallel.hpp"

namespace keyframe::quality {

RawVector harden(const ProbVector& p) {
  std::array<double, core::kNumClasses> v{};
  const std::size_t k = core::index_of(core::argmax_class(p));
  v[k] = p[k];
  return RawVector(v);
}

std::vector<bool> stability_mask(std::span<const ClassLabel> classes, StabilityWindow window) {
  if (classes.empty()) throw Error(ErrorCode::EmptySequence, "stability mask needs at least one frame");
  const std::size_t n = classes.size();
  const std::size_t w = window.frames;

  // run_end[i]: one past the last index of the constant run containing i;
  // run_begin[i]: first index of that run. A frame is stable iff its clipped
  // window fits inside its run.
  std::vector<std::size_t> run_begin(n), run_end(n);
  for (std::size_t i = 0; i < n; ++i) run_begin[i] = (i > 0 && classes[i] == classes[i - 1]) ? run_begin[i - 1] : i;
  for (std::size_t i = n; i-- > 0;) run_end[i] = (i + 1 < n && classes[i] == classes[i + 1]) ? run_end[i + 1] : i + 1;

  std::vector<bool> stable(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= w ? i - w : 0;
    const std::size_t hi = std::min(n - 1, i + w);
    stable[i] = run_begin[i] <= lo && hi < run_end[i];
  }
  return stable;
}

std::vector<RawVector> harden_and_filter(std::span<const ProbVector> series, StabilityWindow window) {
  if (series.empty()) throw Error(ErrorCode::EmptySequence, "cannot filter an empty probability series");
  std::vector<ClassLabel> classes(series.size());
  std::transform(series.begin(), series.end(), classes.begin(),
                 [](const ProbVector& p) { return core::argmax_class(p); });
  const auto stable = stability_mask(classes, window);
  std::vector<RawVector> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (stable[i]) out[i] = harden(series[i]);
  }
  return out;
}

std::vector<RawVector> tta_aggregate(const std::vector<std::vector<RawVector>>& per_transform) {
  if (per_transform.empty()) throw Error(ErrorCode::EmptySequence, "aggregation needs at least one transform");
  const std::size_t n = per_transform.front().size();
  for (std::size_t t = 1; t < per_transform.size(); ++t) {
    if (per_transform[t].size() != n) {
      throw Error(ErrorCode::LengthMismatch, "transform " + std::to_string(t) + " has " +
                                                 std::to_string(per_transform[t].size()) + " frames, expected " +
                                                 std::to_string(n));
    }
  }
  const double count = static_cast<double>(per_transform.size());
  std::vector<RawVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, core::kNumClasses> sum{};
    for (const auto& seq : per_transform) {
      for (std::size_t k = 0; k < core::kNumClasses; ++k) sum[k] += seq[i][k];
    }
    for (double& s : sum) s /= count;
    out.emplace_back(sum);
  }
  return out;
}

QualityScore margin_quality(const RawVector& v) {
  const auto& x = v.values();
  const std::size_t top = core::index_of(core::argmax_class(v));
  double rest = 0.0;
  for (std::size_t k = 0; k < core::kNumClasses; ++k) {
    if (k != top) rest += x[k];
  }
  return QualityScore(std::clamp(x[top] - rest, 0.0, 1.0));
}

QualitySeries quality_from_probs(const std::vector<std::vector<ProbVector>>& per_transform, StabilityWindow window) {
  if (per_transform.empty()) throw Error(ErrorCode::EmptySequence, "no transforms supplied");
  const std::size_t n = per_transform.front().size();
  if (n == 0) throw Error(ErrorCode::EmptySequence, "video has no frames");

  std::vector<std::vector<RawVector>> filtered;
  filtered.reserve(per_transform.size());
  for (const auto& seq : per_transform) {
    if (seq.size() != n) throw Error(ErrorCode::LengthMismatch, "transform sequences differ in length");
    filtered.push_back(harden_and_filter(seq, window));
  }

  std::vector<ClassLabel> original(n);
  std::transform(per_transform.front().begin(), per_transform.front().end(), original.begin(),
                 [](const ProbVector& p) { return core::argmax_class(p); });
  const auto original_stable = stability_mask(original, window);

  const auto aggregated = tta_aggregate(filtered);
  QualitySeries series(n);
  for (std::size_t i = 0; i < n; ++i) {
    FrameQuality& fq = series[i];
    fq.aggregated = aggregated[i];
    fq.stable_in_original = original_stable[i];
    if (aggregated[i].is_zero()) {
      fq.selected_class = ClassLabel::NotABrain;
      fq.quality = QualityScore(0.0);
    } else {
      fq.selected_class = core::argmax_class(aggregated[i]);
      fq.quality = margin_quality(aggregated[i]);
    }
  }
  return series;
}

ClassifiedVideo classify_video(std::span<const Frame> frames, const classifier::ModelHandle& handle,
                               const transforms::TtaCatalogue& catalogue, std::size_t workers) {
  if (frames.empty()) throw Error(ErrorCode::EmptySequence, "video has no frames");
  const std::size_t n = frames.size();
  const std::size_t t_count = catalogue.size();

  // Slots are filled out of order by the pool; optional keeps ProbVector's
  // validating constructor out of the default-construction path.
  std::vector<std::optional<classifier::ClassifierOutput>> slots(n * t_count);
  parallel_for(slots.size(), workers, [&](std::size_t job) {
    const std::size_t t = job / n;
    const std::size_t i = job % n;
    const Frame input = transforms::apply_affine(frames[i], catalogue[t]);
    slots[job] = handle.classify(input);
  });

  ClassifiedVideo out;
  out.probs.resize(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    out.probs[t].reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.probs[t].push_back(slots[t * n + i]->probs);
  }
  out.identity_features.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.identity_features.push_back(std::move(slots[i]->features));
  return out;
}

QualitySeries compute_quality_series(std::span<const Frame> frames, const classifier::ModelHandle& handle,
                                     const transforms::TtaCatalogue& catalogue, StabilityWindow window,
                                     std::size_t workers) {
  return quality_from_probs(classify_video(frames, handle, catalogue, workers).probs, window);
}

}  // namespace keyframe::quality
