#pragma once

// Affine frame transforms for test-time augmentation and training-time
// augmentation.
//
// Geometry conventions (pixel-index coordinates, y pointing down):
//   - rotation and scaling act about the frame center ((W-1)/2, (H-1)/2);
//   - Rotate(a) with a > 0 turns the content counter-clockwise as displayed;
//   - Translate(dx, dy) moves content right/down by dx*W, dy*H pixels;
//   - Scale(f), f >= 1, zooms in: the central 1/f region fills the frame;
//   - samples falling outside the source read as 0 (black), bilinear weights.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "keyframe/core.hpp"

namespace keyframe::transforms {

using core::Frame;

class AffineSpec {
 public:
  enum class Kind { Identity, HorizontalFlip, VerticalFlip, Rotate, Translate, Scale };

  static AffineSpec identity() { return AffineSpec(Kind::Identity, 0, 0); }
  static AffineSpec horizontal_flip() { return AffineSpec(Kind::HorizontalFlip, 0, 0); }
  static AffineSpec vertical_flip() { return AffineSpec(Kind::VerticalFlip, 0, 0); }
  static AffineSpec rotate(double angle_deg);        // [-180, 180]
  static AffineSpec translate(double dx, double dy);  // |dx|, |dy| <= 0.5, fractions of W, H
  static AffineSpec scale(double factor);            // [1, 2]

  Kind kind() const noexcept { return kind_; }
  double angle_deg() const noexcept { return kind_ == Kind::Rotate ? a_ : 0.0; }
  double dx() const noexcept { return kind_ == Kind::Translate ? a_ : 0.0; }
  double dy() const noexcept { return kind_ == Kind::Translate ? b_ : 0.0; }
  double factor() const noexcept { return kind_ == Kind::Scale ? a_ : 1.0; }

  std::string describe() const;  // e.g. "rotate(-15)", "translate(0.1,0.1)"

  friend bool operator==(const AffineSpec&, const AffineSpec&) = default;

 private:
  AffineSpec(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}

  Kind kind_;
  double a_;
  double b_;
};

/// Ordered augmentation list; element 0 is always Identity (the original
/// video) and no spec appears twice.
class TtaCatalogue {
 public:
  explicit TtaCatalogue(std::vector<AffineSpec> specs);

  const std::vector<AffineSpec>& specs() const noexcept { return specs_; }
  std::size_t size() const noexcept { return specs_.size(); }
  const AffineSpec& operator[](std::size_t i) const noexcept { return specs_[i]; }

 private:
  std::vector<AffineSpec> specs_;
};

/// Identity, horizontal flip, rotations of +-15/+-10/+-5 degrees, the two
/// diagonal translations of +-10%, and zoom-in scales 1.05/1.10/1.15/1.20.
TtaCatalogue default_tta_catalogue();

/// Catalogue file: JSON {"format_version": 1, "transforms": [{"kind": ...}, ...]}.
/// See docs/formats.md.
TtaCatalogue load_catalogue(const std::filesystem::path& path);
TtaCatalogue parse_catalogue(const std::string& text);
std::string serialize_catalogue(const TtaCatalogue& catalogue);

Frame apply_affine(const Frame& frame, const AffineSpec& spec);

struct TrainAugmentRanges {
  double scale_min = 0.9, scale_max = 1.1;
  double flip_probability = 0.5;  // independently for each axis
  double max_shift = 0.1;         // fraction of width/height
  double max_rotation_deg = 15.0;
};

/// Seeded random composition of scale, flips, translation and rotation,
/// resampled once. Deterministic for a fixed (frame, seed).
Frame random_train_augment(const Frame& frame, std::uint64_t seed, const TrainAugmentRanges& ranges = {});

/// Bilinear resize with edge replication (half-pixel centers).
Frame resize_bilinear(const Frame& frame, std::size_t width, std::size_t height);

}  // namespace keyframe::transforms
