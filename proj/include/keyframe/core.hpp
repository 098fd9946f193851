#pragma once

// Shared domain types for the keyframe engine.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace keyframe {

enum class ErrorCode {
  InvalidArgument,
  EmptySequence,
  LengthMismatch,
  ShapeMismatch,
  FileNotFound,
  UnsupportedFormat,
  InferenceFailure,
  IoError,
  FormatVersionMismatch,
  EmptyDataset,
  EmptyManifest,
  EmptyList,
  EmptySeries,
  NoFrames,
  InconsistentDimensions,
  UnreadableFile,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures surface as this exception; the code is the contract,
// the message carries context (file names, offending indices).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace core {

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::size_t kFeatureDim = 1280;
inline constexpr double kSumTolerance = 1e-6;

enum class ClassLabel : std::uint8_t {
  TransVentricular = 0,
  TransThalamic = 1,
  TransCerebellar = 2,
  BrainOther = 3,
  NotABrain = 4,
};

inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::TransVentricular, ClassLabel::TransThalamic, ClassLabel::TransCerebellar,
    ClassLabel::BrainOther, ClassLabel::NotABrain};

constexpr std::size_t index_of(ClassLabel c) noexcept { return static_cast<std::size_t>(c); }

// Throws InvalidArgument for codes outside 0..4.
ClassLabel label_from_index(std::size_t code);

/// Snake-case names used in manifests and output records,
/// e.g. "trans_thalamic", "not_a_brain".
std::string_view label_name(ClassLabel c) noexcept;
ClassLabel parse_label(std::string_view name);

constexpr bool is_brain(ClassLabel c) noexcept { return c != ClassLabel::NotABrain; }

/// Five class probabilities of one frame: non-negative, at most 1 each,
/// summing to 1 within kSumTolerance. Validated at construction.
class ProbVector {
 public:
  explicit ProbVector(const std::array<double, kNumClasses>& p);

  double operator[](std::size_t k) const noexcept { return p_[k]; }
  const std::array<double, kNumClasses>& values() const noexcept { return p_; }

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  std::array<double, kNumClasses> p_;
};

/// Sub-stochastic class vector produced by hardening or by averaging over
/// augmentations: non-negative, sum at most 1 (+tolerance).
class RawVector {
 public:
  RawVector() noexcept : v_{} {}
  explicit RawVector(const std::array<double, kNumClasses>& v);

  double operator[](std::size_t k) const noexcept { return v_[k]; }
  const std::array<double, kNumClasses>& values() const noexcept { return v_; }
  bool is_zero() const noexcept;

  friend bool operator==(const RawVector&, const RawVector&) = default;

 private:
  std::array<double, kNumClasses> v_;
};

/// Penultimate-layer embedding of one frame: exactly kFeatureDim finite values.
class FeatureVector {
 public:
  explicit FeatureVector(std::vector<double> f);

  std::span<const double> values() const noexcept { return f_; }
  double operator[](std::size_t i) const noexcept { return f_[i]; }
  std::size_t size() const noexcept { return f_.size(); }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<double> f_;
};

/// Single-channel image, row-major, intensities in [0,1].
class Frame {
 public:
  Frame(std::size_t width, std::size_t height);  // all zeros
  Frame(std::size_t width, std::size_t height, std::vector<float> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  float at(std::size_t x, std::size_t y) const noexcept { return pixels_[y * width_ + x]; }
  std::span<const float> pixels() const noexcept { return pixels_; }

  // Mutable access for producers; callers are responsible for keeping values
  // in [0,1]. Use validate() after bulk writes from untrusted sources.
  float& at(std::size_t x, std::size_t y) noexcept { return pixels_[y * width_ + x]; }
  std::span<float> mutable_pixels() noexcept { return pixels_; }
  void validate() const;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<float> pixels_;
};

/// Frame quality in [0,1].
class QualityScore {
 public:
  QualityScore() noexcept = default;
  explicit QualityScore(double q);

  double value() const noexcept { return q_; }
  operator double() const noexcept { return q_; }

 private:
  double q_ = 0.0;
};

/// Label of the largest entry; ties go to the lowest class code.
ClassLabel argmax_class(std::span<const double, kNumClasses> p) noexcept;
inline ClassLabel argmax_class(const ProbVector& p) noexcept { return argmax_class(p.values()); }
inline ClassLabel argmax_class(const RawVector& v) noexcept { return argmax_class(v.values()); }

/// Numerically stable softmax over five logits.
std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& logits) noexcept;

/// std::mt19937_64 with distribution helpers that use a fixed bit recipe.
/// The std:: distributions are implementation-defined; these are not, so
/// seeded outputs (golden files, fixtures) match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform01();  // [0,1), 53-bit
  double uniform(double lo, double hi);
  double normal();  // Box-Muller, one draw per call
  bool bernoulli(double p);
  std::uint64_t below(std::uint64_t n);  // uniform in [0,n), n > 0

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent stream seeds from
/// (seed, epoch, step, ...) tuples.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace core
}  // namespace keyframe
