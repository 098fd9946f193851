#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "keyframe/classifier.hpp"
#include "keyframe/core.hpp"
#include "keyframe/transforms.hpp"

namespace keyframe::testing {

inline std::filesystem::path data_dir() { return KEYFRAME_TEST_DATA; }

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    core::Rng rng(core::mix_seed(static_cast<std::uint64_t>(::getpid()), ++counter));
    path_ = std::filesystem::temp_directory_path() / ("keyframe_" + tag + "_" + std::to_string(rng.next_u64() % 1000000000));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Cheap deterministic classifier on 8x8 frames. The class follows the
/// quantized mean intensity, the probabilities come from a hash of the
/// quantized pixels; about one call in eight yields an exact two-way tie.
class BucketBackend final : public classifier::Backend {
 public:
  explicit BucketBackend(std::uint64_t seed) : seed_(seed) {}

  std::size_t input_width() const override { return 8; }
  std::size_t input_height() const override { return 8; }
  bool thread_safe() const override { return true; }
  std::string description() const override { return "bucket"; }

  classifier::ClassifierOutput run(const core::Frame& frame) const override {
    double mean = 0.0;
    std::uint64_t h = seed_;
    for (float v : frame.pixels()) {
      mean += v;
      h = core::mix_seed(h, static_cast<std::uint64_t>(std::lround(v * 64.0)));
    }
    mean /= static_cast<double>(frame.pixels().size());
    const auto top = std::min<std::size_t>(core::kNumClasses - 1, static_cast<std::size_t>(mean * 5.0));
    core::Rng rng(h);
    std::array<double, core::kNumClasses> p{};
    if (rng.below(8) == 0) {
      // exact tie between two classes, rest zero
      const std::size_t other = (top + 1 + rng.below(core::kNumClasses - 1)) % core::kNumClasses;
      p[top] = 0.5;
      p[other] = 0.5;
    } else {
      double rest = 0.0;
      for (std::size_t k = 0; k < core::kNumClasses; ++k) {
        if (k == top) continue;
        p[k] = rng.uniform(0.0, 0.1);
        rest += p[k];
      }
      p[top] = 1.0 - rest;
    }
    std::vector<double> f(core::kFeatureDim, mean);
    return {core::ProbVector(p), core::FeatureVector(std::move(f))};
  }

 private:
  std::uint64_t seed_;
};

inline classifier::ModelHandle bucket_classifier(std::uint64_t seed) {
  return classifier::ModelHandle(std::make_shared<const BucketBackend>(seed));
}

/// Random 8x8 video made of constant-brightness runs with mild noise, so
/// class runs of varying lengths appear.
inline std::vector<core::Frame> run_video(core::Rng& rng, std::size_t n) {
  std::vector<core::Frame> frames;
  frames.reserve(n);
  double level = rng.uniform01();
  while (frames.size() < n) {
    const std::size_t run = 1 + rng.below(12);
    level = rng.uniform01();
    for (std::size_t r = 0; r < run && frames.size() < n; ++r) {
      std::vector<float> px(64);
      for (float& v : px) v = static_cast<float>(std::clamp(level + 0.03 * rng.normal(), 0.0, 1.0));
      frames.emplace_back(8, 8, std::move(px));
    }
  }
  return frames;
}

/// Random non-duplicate catalogue of `size` entries, identity first.
inline transforms::TtaCatalogue random_catalogue(core::Rng& rng, std::size_t size) {
  const auto pool = transforms::default_tta_catalogue().specs();
  std::vector<transforms::AffineSpec> rest(pool.begin() + 1, pool.end());
  for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[rng.below(i)]);
  std::vector<transforms::AffineSpec> specs{transforms::AffineSpec::identity()};
  specs.insert(specs.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(size - 1));
  return transforms::TtaCatalogue(std::move(specs));
}

// ---- metric oracle ----------------------------------------------------------
// Written directly from the definition, one frame at a time, with no shared
// code beyond the classifier call.

struct OracleFrame {
  double quality = 0.0;
  std::size_t selected_class = 4;
  std::array<double, core::kNumClasses> aggregated{};
};

inline std::size_t oracle_argmax(const std::array<double, core::kNumClasses>& p) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < core::kNumClasses; ++k) {
    bool beaten = false;
    for (std::size_t j = 0; j < core::kNumClasses; ++j) {
      if (p[j] > p[k] || (p[j] == p[k] && j < k)) beaten = true;
    }
    if (!beaten) best = k;
  }
  return best;
}

inline std::vector<OracleFrame> oracle_quality(const std::vector<std::vector<std::array<double, 5>>>& probs,
                                               std::size_t window) {
  const std::size_t transforms_n = probs.size();
  const std::size_t n = probs.front().size();
  std::vector<OracleFrame> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, core::kNumClasses> sum{};
    for (std::size_t t = 0; t < transforms_n; ++t) {
      const std::size_t ci = oracle_argmax(probs[t][i]);
      bool stable = true;
      for (long j = static_cast<long>(i) - static_cast<long>(window); j <= static_cast<long>(i + window); ++j) {
        if (j < 0 || j >= static_cast<long>(n)) continue;
        if (oracle_argmax(probs[t][static_cast<std::size_t>(j)]) != ci) stable = false;
      }
      if (stable) sum[ci] += probs[t][i][ci];
    }
    for (double& s : sum) s /= static_cast<double>(transforms_n);
    OracleFrame& f = out[i];
    f.aggregated = sum;
    const bool zero = std::all_of(sum.begin(), sum.end(), [](double v) { return v == 0.0; });
    if (zero) continue;
    f.selected_class = oracle_argmax(sum);
    double q = sum[f.selected_class];
    for (std::size_t k = 0; k < core::kNumClasses; ++k) {
      if (k != f.selected_class) q -= sum[k];
    }
    f.quality = std::min(1.0, std::max(0.0, q));
  }
  return out;
}

/// Classifies every (transform, frame) pair in a plain nested loop.
inline std::vector<std::vector<std::array<double, 5>>> oracle_probs(const std::vector<core::Frame>& frames,
                                                                    const classifier::ModelHandle& model,
                                                                    const transforms::TtaCatalogue& cat) {
  std::vector<std::vector<std::array<double, 5>>> out(cat.size());
  for (std::size_t t = 0; t < cat.size(); ++t) {
    for (const auto& f : frames) out[t].push_back(model.classify(transforms::apply_affine(f, cat[t])).probs.values());
  }
  return out;
}

}  // namespace keyframe::testing
