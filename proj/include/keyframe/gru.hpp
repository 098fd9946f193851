#pragma once

// Recurrent frame-quality head: GRU -> dropout(0.1) -> GRU -> dropout(0.2)
// -> dense(1) -> sigmoid, run causally over a video's feature sequence.
//
// Gate layout follows the common (r, z, n) stacking:
//   r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
// w_ih is 3H x I with row blocks [r; z; n], w_hh is 3H x H, biases are 3H.
// Hidden state starts at zero for every sequence.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "keyframe/core.hpp"

namespace keyframe::gru {

using core::FeatureVector;
using core::QualityScore;

inline constexpr std::size_t kInputDim = core::kFeatureDim;
inline constexpr std::size_t kDefaultHidden = 128;
inline constexpr double kDropout1 = 0.1;
inline constexpr double kDropout2 = 0.2;

struct GruLayerWeights {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<double> w_ih;
  std::vector<double> w_hh;
  std::vector<double> b_ih;
  std::vector<double> b_hh;

  static GruLayerWeights zeros(std::size_t input_dim, std::size_t hidden_dim);
  void validate() const;  // ShapeMismatch on inconsistent sizes, InvalidArgument on non-finite values
  std::size_t parameter_count() const { return w_ih.size() + w_hh.size() + b_ih.size() + b_hh.size(); }

  friend bool operator==(const GruLayerWeights&, const GruLayerWeights&) = default;
};

struct GruHeadModel {
  GruLayerWeights layer1;
  GruLayerWeights layer2;
  std::vector<double> dense_w;
  double dense_b = 0.0;
  double dropout1 = kDropout1;
  double dropout2 = kDropout2;

  /// The production architecture: 1280 inputs, dropouts 0.1 / 0.2, weights
  /// drawn uniformly from +-1/sqrt(hidden) with the given seed.
  static GruHeadModel create(std::size_t hidden_dim, std::uint64_t seed);
  /// Same layout with every weight and bias zero (output 0.5 everywhere).
  static GruHeadModel zeros(std::size_t hidden_dim);
  /// Arbitrary dimensions, for experiments and gradient checks.
  static GruHeadModel custom(std::size_t input_dim, std::size_t hidden_dim, double dropout1, double dropout2,
                             std::uint64_t seed);

  std::size_t input_dim() const noexcept { return layer1.input_dim; }
  std::size_t hidden_dim() const noexcept { return layer1.hidden_dim; }
  std::size_t parameter_count() const {
    return layer1.parameter_count() + layer2.parameter_count() + dense_w.size() + 1;
  }

  /// Internal consistency: layer2 input = layer1 hidden = layer2 hidden =
  /// dense width, dropouts in [0,1), finite values.
  void validate() const;
  /// validate() plus the production constants (input 1280, dropouts 0.1/0.2).
  void check_architecture() const;

  /// Flat views over every parameter in a fixed order (layer1 w_ih, w_hh,
  /// b_ih, b_hh, layer2 likewise, dense_w, dense_b); used by the optimizer
  /// and by gradient checks.
  std::vector<std::span<double>> parameter_blocks();

  friend bool operator==(const GruHeadModel&, const GruHeadModel&) = default;
};

/// Row-major T x input_dim feature matrix.
struct Sequence {
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t t) const { return {values.data() + t * dim, dim}; }
  static Sequence from_features(std::span<const FeatureVector> features);
};

enum class Mode { Inference, Training };

/// One GRU step. Throws ShapeMismatch when x or h do not match the weights.
std::vector<double> gru_cell_step(std::span<const double> x, std::span<const double> h, const GruLayerWeights& w);

/// Per-frame outputs in (0,1). Dropout (inverted) is active only in Training
/// mode, with masks derived from `seed`; Inference ignores the seed.
std::vector<double> forward(const GruHeadModel& model, const Sequence& seq, Mode mode, std::uint64_t seed = 0);
std::vector<QualityScore> forward(const GruHeadModel& model, std::span<const FeatureVector> seq, Mode mode,
                                  std::uint64_t seed = 0);

/// Mean squared error. Throws LengthMismatch / EmptySequence.
double loss(std::span<const double> pred, std::span<const double> target);

struct Gradients {
  GruLayerWeights layer1;
  GruLayerWeights layer2;
  std::vector<double> dense_w;
  double dense_b = 0.0;
  double loss = 0.0;  // training-mode loss at the evaluated point

  std::vector<std::span<double>> blocks();  // same order as GruHeadModel::parameter_blocks
};

/// Exact gradient of the training-mode loss (dropout masks fixed by seed)
/// by backpropagation through time.
Gradients backward(const GruHeadModel& model, const Sequence& seq, std::span<const double> target, std::uint64_t seed);

/// Float32 inference copy of a trained model.
class GruInferenceF32 {
 public:
  explicit GruInferenceF32(const GruHeadModel& model);
  std::vector<double> run(const Sequence& seq) const;

 private:
  struct Layer {
    std::size_t input_dim, hidden_dim;
    std::vector<float> w_ih, w_hh, b_ih, b_hh;
  };
  Layer layer1_, layer2_;
  std::vector<float> dense_w_;
  float dense_b_;
};

// ---- training ---------------------------------------------------------------

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  double learning_rate = 5e-4;
  double weight_decay = 1e-5;  // decoupled: theta -= lr * wd * theta
  std::size_t max_epochs = 60;
  std::size_t early_stop_patience = 20;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Sgd;
  double momentum = 0.0;  // SGD only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

struct TrainingPair {
  Sequence features;
  std::vector<double> targets;  // one quality target in [0,1] per step
};

enum class StopReason { MaxEpochs, EarlyStop };
std::string_view to_string(StopReason r) noexcept;

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0-based
  StopReason stop_reason = StopReason::MaxEpochs;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  GruHeadModel model;  // weights from the best validation epoch
  TrainHistory history;
};

/// Mean validation loss in inference mode.
double evaluate(const GruHeadModel& model, std::span<const TrainingPair> data);

/// One sequence per update, shuffled each epoch; validation after every
/// epoch; stops at max_epochs or after `early_stop_patience` epochs without
/// a strict improvement. Single-threaded and deterministic for fixed seeds.
/// Throws EmptyDataset.
TrainResult train(GruHeadModel model, std::span<const TrainingPair> train_set, std::span<const TrainingPair> val_set,
                  const TrainConfig& cfg);

/// Applies one optimizer update to `model` from `grads` (state is carried
/// by the caller for stateful optimizers). Exposed for tests.
class OptimizerState {
 public:
  OptimizerState(const GruHeadModel& model, const TrainConfig& cfg);
  void step(GruHeadModel& model, Gradients& grads);

 private:
  TrainConfig cfg_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::uint64_t steps_ = 0;
};

// ---- persistence ------------------------------------------------------------

inline constexpr int kWeightsFormatVersion = 1;

/// JSON weights document (see docs/formats.md). Round-trip is bit-exact.
void save_weights(const GruHeadModel& model, const std::filesystem::path& path);
GruHeadModel load_weights(const std::filesystem::path& path);
std::string serialize_weights(const GruHeadModel& model);
GruHeadModel parse_weights(const std::string& text);

}  // namespace keyframe::gru
