#pragma once

// Per-frame classification: five plane probabilities plus the 1280-dim
// penultimate embedding, from pluggable backends.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "keyframe/core.hpp"

namespace keyframe::classifier {

using core::FeatureVector;
using core::Frame;
using core::ProbVector;

struct ClassifierOutput {
  ProbVector probs;
  FeatureVector features;
};

/// A backend sees frames already resized to its declared input size.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::size_t input_width() const = 0;
  virtual std::size_t input_height() const = 0;
  virtual ClassifierOutput run(const Frame& frame) const = 0;
  virtual std::string description() const = 0;
  // True when run() may be called concurrently on one instance.
  virtual bool thread_safe() const = 0;
};

/// Shared, read-only reference to a loaded backend. Copies share the model.
class ModelHandle {
 public:
  explicit ModelHandle(std::shared_ptr<const Backend> backend);

  std::size_t input_width() const noexcept { return backend_->input_width(); }
  std::size_t input_height() const noexcept { return backend_->input_height(); }
  std::size_t num_classes() const noexcept { return core::kNumClasses; }
  std::size_t feature_dim() const noexcept { return core::kFeatureDim; }
  std::string description() const { return backend_->description(); }

  /// Resizes to the declared input size (bilinear), then runs the backend.
  /// Backends that are not thread-safe are serialized through a mutex.
  ClassifierOutput classify(const Frame& frame) const;

 private:
  std::shared_ptr<const Backend> backend_;
  std::shared_ptr<std::mutex> serial_;
};

inline ClassifierOutput classify(const ModelHandle& handle, const Frame& frame) { return handle.classify(frame); }

/// Loads an ONNX model (see docs/formats.md for the expected graph contract:
/// one NCHW image input with static H, W and C in {1,3}; outputs "features"
/// [1,1280] and "probs" or "logits" [1,5]).
/// Errors: FileNotFound, UnsupportedFormat, ShapeMismatch.
ModelHandle load_model(const std::filesystem::path& path);

/// Deterministic test double: probabilities are a softmax over seeded random
/// projections of the four quadrant means and the global mean; features are
/// seeded random projections of a 16x16 box-downsampled copy of the frame.
/// Input size 64x64.
ModelHandle synthetic_classifier(std::uint64_t seed);

/// "synthetic:<seed>" selects the synthetic backend, anything else is a path
/// passed to load_model.
ModelHandle open_model(const std::string& spec);

}  // namespace keyframe::classifier
