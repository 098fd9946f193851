#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "keyframe/dataset.hpp"

namespace keyframe::dataset {

SplitResult patient_disjoint_split(const DatasetManifest& m, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must be in (0,1)");
  }
  if (m.empty()) throw Error(ErrorCode::EmptyManifest, "cannot split an empty manifest");

  // Patients in first-seen order, then a seeded shuffle so ties in image
  // count are broken differently per seed.
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> patients;
  std::vector<std::size_t> counts;
  for (const auto& e : m.entries()) {
    auto [it, inserted] = index.try_emplace(e.patient_id, patients.size());
    if (inserted) {
      patients.push_back(e.patient_id);
      counts.push_back(0);
    }
    ++counts[it->second];
  }
  std::vector<std::size_t> order(patients.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  core::Rng rng(core::mix_seed(seed, 0x73706c74));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

  const double total = static_cast<double>(m.size());
  const double train_target = train_fraction * total;
  const double val_target = total - train_target;
  std::vector<bool> to_train(patients.size());
  double train_images = 0.0, val_images = 0.0;
  SplitResult result;
  for (std::size_t p : order) {
    const bool train = (train_target - train_images) >= (val_target - val_images);
    to_train[p] = train;
    (train ? train_images : val_images) += static_cast<double>(counts[p]);
    ++(train ? result.train_patients : result.val_patients);
  }

  std::vector<ImageEntry> train, val;
  for (const auto& e : m.entries()) (to_train[index.at(e.patient_id)] ? train : val).push_back(e);
  result.train = DatasetManifest(std::move(train));
  result.val = DatasetManifest(std::move(val));
  result.achieved_fraction = train_images / total;
  result.degenerate = result.train.empty() || result.val.empty();
  if (result.degenerate) {
    spdlog::warn("patient split is degenerate: {} patient(s) in train, {} in validation", result.train_patients,
                 result.val_patients);
  }
  return result;
}

DatasetManifest epoch_undersample(const DatasetManifest& train, std::uint64_t epoch, std::uint64_t seed,
                                  std::size_t cap) {
  if (cap == 0) throw Error(ErrorCode::InvalidArgument, "undersampling cap must be positive");
  const auto& entries = train.entries();
  std::vector<std::size_t> majority;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].label == ClassLabel::NotABrain) majority.push_back(i);
  }
  std::vector<bool> keep(entries.size(), true);
  if (majority.size() > cap) {
    // Partial Fisher-Yates: the first `cap` slots become the sample.
    core::Rng rng(core::mix_seed(core::mix_seed(seed, 0x65706f63), epoch));
    for (std::size_t i = 0; i < cap; ++i) {
      const std::size_t j = i + rng.below(majority.size() - i);
      std::swap(majority[i], majority[j]);
    }
    for (std::size_t i = cap; i < majority.size(); ++i) keep[majority[i]] = false;
  }
  std::vector<ImageEntry> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (keep[i]) out.push_back(entries[i]);
  }
  return DatasetManifest(std::move(out));
}

}  // namespace keyframe::dataset
