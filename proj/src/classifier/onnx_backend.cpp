#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>

#include <spdlog/spdlog.h>

#include "keyframe/classifier.hpp"
#include "onnx/graph.hpp"

namespace keyframe::classifier {
namespace {

using onnx::Graph;
using onnx::Tensor;

constexpr const char* kFeaturesOutput = "features";
constexpr const char* kProbsOutput = "probs";
constexpr const char* kLogitsOutput = "logits";

// Runs an ONNX graph with the in-house interpreter. The interpreter keeps no
// state between calls and the graph is immutable after loading, so run() is
// safe to call concurrently.
class OnnxBackend final : public Backend {
 public:
  OnnxBackend(Graph graph, std::string origin) : graph_(std::move(graph)), origin_(std::move(origin)) {
    if (graph_.inputs.size() != 1) {
      throw Error(ErrorCode::UnsupportedFormat, "model must have exactly one image input, found " +
                                                    std::to_string(graph_.inputs.size()));
    }
    const auto& dims = graph_.inputs.front().dims;
    if (dims.size() != 4 || (dims[1] != 1 && dims[1] != 3) || dims[2] <= 0 || dims[3] <= 0) {
      throw Error(ErrorCode::UnsupportedFormat,
                  "image input must be NCHW with C in {1,3} and static H, W");
    }
    input_name_ = graph_.inputs.front().name;
    channels_ = static_cast<std::size_t>(dims[1]);
    height_ = static_cast<std::size_t>(dims[2]);
    width_ = static_cast<std::size_t>(dims[3]);

    bool has_features = false;
    for (const auto& o : graph_.outputs) {
      if (o.name == kFeaturesOutput) has_features = true;
      if (o.name == kProbsOutput) probs_name_ = kProbsOutput;
      if (o.name == kLogitsOutput && probs_name_.empty()) probs_name_ = kLogitsOutput;
    }
    if (!has_features || probs_name_.empty()) {
      throw Error(ErrorCode::UnsupportedFormat, "model outputs must include 'features' and 'probs' or 'logits'");
    }
    for (const auto& node : graph_.nodes) {
      if (!node.domain.empty() && node.domain != "ai.onnx") {
        throw Error(ErrorCode::UnsupportedFormat, "custom operator domain '" + node.domain + "'");
      }
      if (!onnx::is_supported_op(node.op_type)) {
        throw Error(ErrorCode::UnsupportedFormat, "operator " + node.op_type + " is not supported");
      }
    }
    // A probe pass on a black frame validates the output arity up front.
    std::pair<std::vector<float>, std::vector<float>> raw;
    try {
      raw = forward(Frame(width_, height_));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InferenceFailure) throw;
      throw Error(ErrorCode::UnsupportedFormat, std::string("probe inference failed: ") + e.what());
    }
    if (raw.first.size() != core::kNumClasses) {
      throw Error(ErrorCode::ShapeMismatch, "class output has " + std::to_string(raw.first.size()) +
                                                " entries, expected " + std::to_string(core::kNumClasses));
    }
    if (raw.second.size() != core::kFeatureDim) {
      throw Error(ErrorCode::ShapeMismatch, "feature output has " + std::to_string(raw.second.size()) +
                                                " entries, expected " + std::to_string(core::kFeatureDim));
    }
  }

  std::size_t input_width() const override { return width_; }
  std::size_t input_height() const override { return height_; }
  bool thread_safe() const override { return true; }
  std::string description() const override { return "onnx:" + origin_; }

  ClassifierOutput run(const Frame& frame) const override {
    auto [scores, features] = forward(frame);
    std::array<double, core::kNumClasses> p{};
    double sum = 0.0;
    bool nonnegative = true;
    for (std::size_t k = 0; k < core::kNumClasses; ++k) {
      p[k] = scores[k];
      if (!std::isfinite(p[k])) throw Error(ErrorCode::InferenceFailure, "non-finite class score from " + origin_);
      nonnegative = nonnegative && p[k] >= 0.0;
      sum += p[k];
    }
    if (probs_name_ == kLogitsOutput) {
      p = core::softmax(p);
    } else if (!nonnegative || sum < 0.99 || sum > 1.01) {
      if (!warned_softmax_.test_and_set()) {
        spdlog::warn("{}: 'probs' output is not normalized (sum {:.4f}); applying softmax", origin_, sum);
      }
      p = core::softmax(p);
    } else {
      // float32 outputs sum to 1 only within ~1e-7; renormalize in double
      for (double& v : p) v /= sum;
    }

    std::vector<double> f(features.begin(), features.end());
    for (double v : f) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InferenceFailure, "non-finite feature from " + origin_);
    }
    return {ProbVector(p), FeatureVector(std::move(f))};
  }

 private:
  std::pair<std::vector<float>, std::vector<float>> forward(const Frame& frame) const {
    const std::size_t plane = width_ * height_;
    std::vector<float> data(channels_ * plane);
    for (std::size_t c = 0; c < channels_; ++c) {
      std::copy(frame.pixels().begin(), frame.pixels().end(), data.begin() + static_cast<std::ptrdiff_t>(c * plane));
    }
    std::unordered_map<std::string, Tensor> feeds;
    feeds.emplace(input_name_, Tensor::floats({1, static_cast<std::int64_t>(channels_), static_cast<std::int64_t>(height_),
                                               static_cast<std::int64_t>(width_)},
                                              std::move(data)));
    std::unordered_map<std::string, Tensor> out;
    try {
      out = onnx::execute(graph_, feeds);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnsupportedFormat) throw;
      throw Error(ErrorCode::InferenceFailure, origin_ + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::InferenceFailure, origin_ + ": " + e.what());
    }
    auto take = [&](const std::string& name) {
      const Tensor& t = out.at(name);
      if (t.type != Tensor::Type::Float) throw Error(ErrorCode::UnsupportedFormat, "output '" + name + "' is not float");
      return t.f;
    };
    return {take(probs_name_), take(kFeaturesOutput)};
  }

  Graph graph_;
  std::string origin_;
  std::string input_name_;
  std::string probs_name_;
  std::size_t channels_ = 1, height_ = 0, width_ = 0;
  mutable std::atomic_flag warned_softmax_ = ATOMIC_FLAG_INIT;
};

}  // namespace

ModelHandle load_model(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, "model file " + path.string() + " does not exist");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open model file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Graph graph = onnx::parse_model(bytes);
  return ModelHandle(std::make_shared<const OnnxBackend>(std::move(graph), path.filename().string()));
}

}  // namespace keyframe::classifier
