#include <cmath>

#include "keyframe/gru.hpp"

namespace keyframe::gru {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " contains a non-finite value");
  }
}

void fill_uniform(std::vector<double>& v, core::Rng& rng, double bound) {
  for (double& x : v) x = rng.uniform(-bound, bound);
}

GruLayerWeights random_layer(std::size_t input_dim, std::size_t hidden_dim, core::Rng& rng) {
  GruLayerWeights w = GruLayerWeights::zeros(input_dim, hidden_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  fill_uniform(w.w_ih, rng, bound);
  fill_uniform(w.w_hh, rng, bound);
  fill_uniform(w.b_ih, rng, bound);
  fill_uniform(w.b_hh, rng, bound);
  return w;
}

void check_dropout(double d, const char* name) {
  if (!(d >= 0.0 && d < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be in [0,1), got " + std::to_string(d));
  }
}

}  // namespace

GruLayerWeights GruLayerWeights::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw Error(ErrorCode::InvalidArgument, "GRU dimensions must be positive");
  GruLayerWeights w;
  w.input_dim = input_dim;
  w.hidden_dim = hidden_dim;
  w.w_ih.assign(3 * hidden_dim * input_dim, 0.0);
  w.w_hh.assign(3 * hidden_dim * hidden_dim, 0.0);
  w.b_ih.assign(3 * hidden_dim, 0.0);
  w.b_hh.assign(3 * hidden_dim, 0.0);
  return w;
}

void GruLayerWeights::validate() const {
  if (input_dim == 0 || hidden_dim == 0) throw Error(ErrorCode::ShapeMismatch, "GRU dimensions must be positive");
  const std::size_t g = 3 * hidden_dim;
  if (w_ih.size() != g * input_dim || w_hh.size() != g * hidden_dim || b_ih.size() != g || b_hh.size() != g) {
    throw Error(ErrorCode::ShapeMismatch, "GRU weight arrays do not match input " + std::to_string(input_dim) +
                                              " / hidden " + std::to_string(hidden_dim));
  }
  require_finite(w_ih, "w_ih");
  require_finite(w_hh, "w_hh");
  require_finite(b_ih, "b_ih");
  require_finite(b_hh, "b_hh");
}

GruHeadModel GruHeadModel::custom(std::size_t input_dim, std::size_t hidden_dim, double dropout1, double dropout2,
                                  std::uint64_t seed) {
  check_dropout(dropout1, "dropout1");
  check_dropout(dropout2, "dropout2");
  core::Rng rng(core::mix_seed(seed, 0x67727531));
  GruHeadModel m;
  m.layer1 = random_layer(input_dim, hidden_dim, rng);
  m.layer2 = random_layer(hidden_dim, hidden_dim, rng);
  m.dense_w.resize(hidden_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  fill_uniform(m.dense_w, rng, bound);
  m.dense_b = rng.uniform(-bound, bound);
  m.dropout1 = dropout1;
  m.dropout2 = dropout2;
  return m;
}

GruHeadModel GruHeadModel::create(std::size_t hidden_dim, std::uint64_t seed) {
  return custom(kInputDim, hidden_dim, kDropout1, kDropout2, seed);
}

GruHeadModel GruHeadModel::zeros(std::size_t hidden_dim) {
  GruHeadModel m;
  m.layer1 = GruLayerWeights::zeros(kInputDim, hidden_dim);
  m.layer2 = GruLayerWeights::zeros(hidden_dim, hidden_dim);
  m.dense_w.assign(hidden_dim, 0.0);
  return m;
}

void GruHeadModel::validate() const {
  layer1.validate();
  layer2.validate();
  if (layer2.input_dim != layer1.hidden_dim) {
    throw Error(ErrorCode::ShapeMismatch, "layer2 input " + std::to_string(layer2.input_dim) +
                                              " does not match layer1 hidden " + std::to_string(layer1.hidden_dim));
  }
  if (layer2.hidden_dim != layer1.hidden_dim) {
    throw Error(ErrorCode::ShapeMismatch, "layer hidden sizes differ: " + std::to_string(layer1.hidden_dim) +
                                              " vs " + std::to_string(layer2.hidden_dim));
  }
  if (dense_w.size() != layer2.hidden_dim) {
    throw Error(ErrorCode::ShapeMismatch, "dense layer width " + std::to_string(dense_w.size()) +
                                              " does not match hidden " + std::to_string(layer2.hidden_dim));
  }
  require_finite(dense_w, "dense_w");
  if (!std::isfinite(dense_b)) throw Error(ErrorCode::InvalidArgument, "dense_b is not finite");
  check_dropout(dropout1, "dropout1");
  check_dropout(dropout2, "dropout2");
}

void GruHeadModel::check_architecture() const {
  validate();
  if (layer1.input_dim != kInputDim) {
    throw Error(ErrorCode::ShapeMismatch,
                "model expects " + std::to_string(layer1.input_dim) + "-dim features, pipeline provides 1280");
  }
  if (dropout1 != kDropout1 || dropout2 != kDropout2) {
    throw Error(ErrorCode::InvalidArgument, "dropout rates must be 0.1 and 0.2");
  }
}

std::vector<std::span<double>> GruHeadModel::parameter_blocks() {
  return {layer1.w_ih, layer1.w_hh, layer1.b_ih, layer1.b_hh, layer2.w_ih, layer2.w_hh,
          layer2.b_ih, layer2.b_hh, dense_w,     std::span<double>(&dense_b, 1)};
}

std::vector<std::span<double>> Gradients::blocks() {
  return {layer1.w_ih, layer1.w_hh, layer1.b_ih, layer1.b_hh, layer2.w_ih, layer2.w_hh,
          layer2.b_ih, layer2.b_hh, dense_w,     std::span<double>(&dense_b, 1)};
}

Sequence Sequence::from_features(std::span<const FeatureVector> features) {
  Sequence s;
  s.steps = features.size();
  s.dim = core::kFeatureDim;
  s.values.reserve(s.steps * s.dim);
  for (const auto& f : features) s.values.insert(s.values.end(), f.values().begin(), f.values().end());
  return s;
}

}  // namespace keyframe::gru
