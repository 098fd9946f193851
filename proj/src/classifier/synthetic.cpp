#include <cmath>

#include "keyframe/classifier.hpp"
#include "keyframe/simd/kernels.hpp"

namespace keyframe::classifier {
namespace {

constexpr std::size_t kSide = 64;
constexpr std::size_t kCoarse = 16;  // downsampled side
constexpr std::size_t kCoarsePixels = kCoarse * kCoarse;
constexpr std::size_t kStats = 5;  // 4 quadrant means + global mean

class SyntheticBackend final : public Backend {
 public:
  explicit SyntheticBackend(std::uint64_t seed) : seed_(seed) {
    core::Rng logit_rng(core::mix_seed(seed, 1));
    for (double& w : logit_weights_) w = 10.0 * logit_rng.normal();
    for (double& b : logit_bias_) b = logit_rng.normal();

    core::Rng feature_rng(core::mix_seed(seed, 2));
    projection_.resize(core::kFeatureDim * kCoarsePixels);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kCoarsePixels));
    for (double& p : projection_) p = scale * feature_rng.normal();
    feature_bias_.resize(core::kFeatureDim);
    for (double& b : feature_bias_) b = 0.1 * feature_rng.normal();
  }

  std::size_t input_width() const override { return kSide; }
  std::size_t input_height() const override { return kSide; }
  bool thread_safe() const override { return true; }
  std::string description() const override { return "synthetic:" + std::to_string(seed_); }

  ClassifierOutput run(const Frame& frame) const override {
    std::array<double, kStats> stats{};
    const std::size_t half = kSide / 2;
    for (std::size_t y = 0; y < kSide; ++y) {
      for (std::size_t x = 0; x < kSide; ++x) {
        const std::size_t q = (y < half ? 0 : 2) + (x < half ? 0 : 1);
        stats[q] += frame.at(x, y);
      }
    }
    const double quadrant_pixels = static_cast<double>(half * half);
    for (std::size_t q = 0; q < 4; ++q) {
      stats[4] += stats[q];
      stats[q] /= quadrant_pixels;
    }
    stats[4] /= static_cast<double>(kSide * kSide);

    std::array<double, core::kNumClasses> logits = logit_bias_;
    simd::active().gemv(logit_weights_.data(), core::kNumClasses, kStats, stats.data(), logits.data());

    std::vector<double> coarse(kCoarsePixels, 0.0);
    constexpr std::size_t block = kSide / kCoarse;
    for (std::size_t y = 0; y < kSide; ++y) {
      for (std::size_t x = 0; x < kSide; ++x) coarse[(y / block) * kCoarse + x / block] += frame.at(x, y);
    }
    for (double& c : coarse) c /= static_cast<double>(block * block);

    std::vector<double> features = feature_bias_;
    simd::active().gemv(projection_.data(), core::kFeatureDim, kCoarsePixels, coarse.data(), features.data());

    return {ProbVector(core::softmax(logits)), FeatureVector(std::move(features))};
  }

 private:
  std::uint64_t seed_;
  std::array<double, core::kNumClasses * kStats> logit_weights_{};
  std::array<double, core::kNumClasses> logit_bias_{};
  std::vector<double> projection_;
  std::vector<double> feature_bias_;
};

}  // namespace

ModelHandle synthetic_classifier(std::uint64_t seed) {
  return ModelHandle(std::make_shared<const SyntheticBackend>(seed));
}

}  // namespace keyframe::classifier
