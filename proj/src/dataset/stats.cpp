#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "keyframe/dataset.hpp"

namespace keyframe::dataset {

ManifestStats manifest_stats(const DatasetManifest& m) {
  ManifestStats s;
  std::array<std::unordered_set<std::string>, core::kNumClasses> per_class;
  std::unordered_set<std::string> brain, all;
  for (const auto& e : m.entries()) {
    const std::size_t k = core::index_of(e.label);
    const bool train = e.split == Split::Train;
    ClassCounts& c = s.per_class[k];
    ++c.images;
    ++s.total.images;
    per_class[k].insert(e.patient_id);
    all.insert(e.patient_id);
    if (train) {
      ++c.train_images;
      ++s.total.train_images;
    }
    if (core::is_brain(e.label)) {
      ++s.brain.images;
      if (train) ++s.brain.train_images;
      brain.insert(e.patient_id);
    }
  }
  for (std::size_t k = 0; k < core::kNumClasses; ++k) s.per_class[k].patients = per_class[k].size();
  s.brain.patients = brain.size();
  s.total.patients = all.size();
  return s;
}

namespace {

Moments moments(std::span<const VideoEntry> v, double VideoEntry::*field) {
  Moments m;
  m.min = m.max = v.front().*field;
  double sum = 0.0;
  for (const auto& e : v) {
    m.min = std::min(m.min, e.*field);
    m.max = std::max(m.max, e.*field);
    sum += e.*field;
  }
  const double n = static_cast<double>(v.size());
  m.mean = sum / n;
  double ss = 0.0;
  for (const auto& e : v) ss += (e.*field - m.mean) * (e.*field - m.mean);
  m.std = std::sqrt(ss / n);
  return m;
}

}  // namespace

VideoStats video_stats(std::span<const VideoEntry> videos) {
  if (videos.empty()) throw Error(ErrorCode::EmptyList, "no videos to summarize");
  return {videos.size(), moments(videos, &VideoEntry::duration_s), moments(videos, &VideoEntry::fps)};
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string cnn_template_json(const CnnTrainingTemplate& t) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["architecture"] = "EfficientNetV2-S";
  doc["feature_dim"] = core::kFeatureDim;
  doc["classes"] = nlohmann::json::array();
  for (auto c : core::kAllClasses) doc["classes"].push_back(std::string(core::label_name(c)));
  doc["batch_size"] = t.batch_size;
  doc["max_epochs"] = t.max_epochs;
  doc["early_stop_patience"] = t.early_stop_patience;
  doc["learning_rate"] = t.learning_rate;
  doc["lr_schedule"] = {{"kind", "reduce_on_plateau"}, {"factor", t.lr_plateau_factor}};
  doc["undersample"] = {{"class", "not_a_brain"}, {"per_epoch", t.not_a_brain_per_epoch}, {"resample_each_epoch", true}};
  doc["split"] = {{"train_fraction", t.train_fraction}, {"patient_disjoint", true}};
  doc["augmentation"] = {"scale", "hflip", "vflip", "translate", "rotate"};
  return doc.dump(2) + "\n";
}

}  // namespace keyframe::dataset
