#include "keyframe/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace keyframe {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::InferenceFailure: return "InferenceFailure";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::NoFrames: return "NoFrames";
    case ErrorCode::InconsistentDimensions: return "InconsistentDimensions";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
  }
  return "Unknown";
}

namespace core {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "trans_ventricular", "trans_thalamic", "trans_cerebellar", "brain_other", "not_a_brain"};

}  // namespace

ClassLabel label_from_index(std::size_t code) {
  if (code >= kNumClasses) {
    throw Error(ErrorCode::InvalidArgument, "class code " + std::to_string(code) + " out of range 0..4");
  }
  return static_cast<ClassLabel>(code);
}

std::string_view label_name(ClassLabel c) noexcept { return kLabelNames[index_of(c)]; }

ClassLabel parse_label(std::string_view name) {
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    if (kLabelNames[k] == name) return static_cast<ClassLabel>(k);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown class label '" + std::string(name) + "'");
}

ProbVector::ProbVector(const std::array<double, kNumClasses>& p) : p_(p) {
  double sum = 0.0;
  for (double x : p_) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "probability entry outside [0,1]");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw Error(ErrorCode::InvalidArgument, "probabilities sum to " + std::to_string(sum) + ", not 1");
  }
}

RawVector::RawVector(const std::array<double, kNumClasses>& v) : v_(v) {
  double sum = 0.0;
  for (double x : v_) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw Error(ErrorCode::InvalidArgument, "raw class vector entry is negative or not finite");
    }
    sum += x;
  }
  if (sum > 1.0 + kSumTolerance) {
    throw Error(ErrorCode::InvalidArgument, "raw class vector sums to " + std::to_string(sum) + " > 1");
  }
}

bool RawVector::is_zero() const noexcept {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return x == 0.0; });
}

FeatureVector::FeatureVector(std::vector<double> f) : f_(std::move(f)) {
  if (f_.size() != kFeatureDim) {
    throw Error(ErrorCode::ShapeMismatch,
                "feature vector has " + std::to_string(f_.size()) + " entries, expected 1280");
  }
  if (!std::all_of(f_.begin(), f_.end(), [](double x) { return std::isfinite(x); })) {
    throw Error(ErrorCode::InvalidArgument, "feature vector contains non-finite values");
  }
}

Frame::Frame(std::size_t width, std::size_t height) : Frame(width, height, std::vector<float>(width * height, 0.0f)) {}

Frame::Frame(std::size_t width, std::size_t height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width_ == 0 || height_ == 0) {
    throw Error(ErrorCode::InvalidArgument, "frame dimensions must be at least 1x1");
  }
  if (pixels_.size() != width_ * height_) {
    throw Error(ErrorCode::ShapeMismatch, "pixel buffer size does not match frame dimensions");
  }
  validate();
}

void Frame::validate() const {
  for (float v : pixels_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw Error(ErrorCode::InvalidArgument, "frame intensity outside [0,1]");
    }
  }
}

QualityScore::QualityScore(double q) : q_(q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "quality score " + std::to_string(q) + " outside [0,1]");
  }
}

ClassLabel argmax_class(std::span<const double, kNumClasses> p) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k) {
    if (p[k] > p[best]) best = k;
  }
  return static_cast<ClassLabel>(best);
}

std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& logits) noexcept {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::array<double, kNumClasses> out{};
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    out[k] = std::exp(logits[k] - top);
    sum += out[k];
  }
  for (double& x : out) x /= sum;
  return out;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
  // 1 - u keeps the log argument in (0,1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool Rng::bernoulli(double p) { return uniform01() < p; }

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace core
}  // namespace keyframe
