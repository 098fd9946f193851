#pragma once

// Image manifests, patient-level splits, per-epoch majority-class
// undersampling and the summary statistics for image and video collections.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "keyframe/core.hpp"

namespace keyframe::dataset {

using core::ClassLabel;

enum class Split { Train, Val };
std::string_view to_string(Split s) noexcept;

struct ImageEntry {
  std::string patient_id;  // opaque
  std::string image_path;  // opaque, never opened here
  ClassLabel label = ClassLabel::NotABrain;
  std::optional<Split> split;  // optional column of published splits

  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

/// Ordered entries with non-empty ids/paths and no repeated image_path.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::vector<ImageEntry> entries);  // InvalidArgument on violations

  const std::vector<ImageEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

 private:
  std::vector<ImageEntry> entries_;
};

/// Comma-delimited text, header `patient_id,image_path,label[,split]`.
DatasetManifest parse_manifest(const std::string& text);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string serialize_manifest(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

struct SplitResult {
  DatasetManifest train;
  DatasetManifest val;
  double achieved_fraction = 0.0;  // train images / all images
  std::size_t train_patients = 0;
  std::size_t val_patients = 0;
  bool degenerate = false;  // one side ended up empty
};

/// Patients are shuffled with `seed`, ordered by image count (largest
/// first) and each is given to whichever side is further below its image
/// target; ties go to train. Entry order inside each side follows the input.
/// Throws EmptyManifest, InvalidArgument for fractions outside (0,1).
SplitResult patient_disjoint_split(const DatasetManifest& m, double train_fraction, std::uint64_t seed);

inline constexpr std::size_t kNotABrainCap = 500;

/// Keeps every non-NotABrain entry and a (seed, epoch)-keyed random subset of
/// min(cap, available) NotABrain entries, preserving input order.
DatasetManifest epoch_undersample(const DatasetManifest& train, std::uint64_t epoch, std::uint64_t seed,
                                  std::size_t cap = kNotABrainCap);

struct ClassCounts {
  std::size_t images = 0;
  std::size_t patients = 0;      // distinct patient ids with at least one image of the class
  std::size_t train_images = 0;  // entries flagged split=train

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct ManifestStats {
  std::array<ClassCounts, core::kNumClasses> per_class{};
  ClassCounts brain;  // the four brain classes together
  ClassCounts total;

  const ClassCounts& operator[](ClassLabel c) const { return per_class[core::index_of(c)]; }
  friend bool operator==(const ManifestStats&, const ManifestStats&) = default;
};

ManifestStats manifest_stats(const DatasetManifest& m);

struct VideoEntry {
  std::string video_id;
  double duration_s = 0.0;
  double fps = 0.0;
  std::uint64_t frame_count = 0;

  /// duration > 0, fps > 0, |frame_count - duration*fps| <= fps.
  void validate() const;
  friend bool operator==(const VideoEntry&, const VideoEntry&) = default;
};

/// Comma-delimited text, header `video_id,duration_s,fps,frame_count`.
std::vector<VideoEntry> parse_video_list(const std::string& text);
std::vector<VideoEntry> load_video_list(const std::filesystem::path& path);

struct Moments {
  double min = 0.0, max = 0.0, mean = 0.0, std = 0.0;  // population std
};

struct VideoStats {
  std::size_t count = 0;
  Moments duration;
  Moments fps;
};

VideoStats video_stats(std::span<const VideoEntry> videos);  // EmptyList
double round2(double v);

/// Classifier-training constants for use with an external training toolkit
/// (no classifier trainer lives in this repository).
struct CnnTrainingTemplate {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 10;
  double learning_rate = 5e-4;
  double lr_plateau_factor = 0.5;
  std::size_t not_a_brain_per_epoch = kNotABrainCap;
  double train_fraction = 0.8;
};
std::string cnn_template_json(const CnnTrainingTemplate& t = {});

}  // namespace keyframe::dataset
