#include <algorithm>
#include <numeric>

#include "keyframe/pipeline.hpp"

namespace keyframe::pipeline {

KeyframeReport select_keyframes(std::span<const double> quality, std::span<const ClassLabel> classes,
                                const KeyframeParams& params, ScoreSource source) {
  if (quality.empty()) throw Error(ErrorCode::EmptySeries, "no frames to select from");
  if (classes.size() != quality.size()) {
    throw Error(ErrorCode::LengthMismatch, "quality and class sequences differ in length");
  }
  if (params.top_k == 0) throw Error(ErrorCode::InvalidArgument, "top_k must be at least 1");
  const std::size_t n = quality.size();

  // Walk plateaus: a run [a, b] of equal values is a peak when both
  // neighbours (where present) are strictly lower; it is reported at a.
  std::vector<std::size_t> peaks;
  for (std::size_t a = 0; a < n;) {
    std::size_t b = a;
    while (b + 1 < n && quality[b + 1] == quality[a]) ++b;
    const bool left = a == 0 || quality[a - 1] < quality[a];
    const bool right = b + 1 == n || quality[b + 1] < quality[a];
    if (left && right) peaks.push_back(a);
    a = b + 1;
  }

  KeyframeReport report;
  report.frame_count = n;
  report.candidates = peaks.size();
  report.params = params;
  std::erase_if(peaks, [&](std::size_t i) { return quality[i] < params.min_quality; });
  report.none_above_threshold = peaks.empty();

  std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return quality[a] > quality[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t i : peaks) {
    if (kept.size() == params.top_k) break;
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t j) {
      return (i > j ? i - j : j - i) > params.nms_radius;
    });
    if (clear) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());
  for (std::size_t i : kept) report.keyframes.push_back({i, quality[i], classes[i], source});
  return report;
}

KeyframeReport select_keyframes(const QualitySeries& series, const KeyframeParams& params) {
  std::vector<double> q(series.size());
  std::vector<ClassLabel> c(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    q[i] = series[i].quality;
    c[i] = series[i].selected_class;
  }
  return select_keyframes(q, c, params, ScoreSource::Metric);
}

}  // namespace keyframe::pipeline
