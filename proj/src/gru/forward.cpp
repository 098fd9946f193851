#include <cmath>

#include "keyframe/gru.hpp"
#include "keyframe/simd/kernels.hpp"

namespace keyframe::gru {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

void check_shapes(const GruHeadModel& m) {
  const auto layer_ok = [](const GruLayerWeights& w) {
    const std::size_t g = 3 * w.hidden_dim;
    return w.hidden_dim > 0 && w.w_ih.size() == g * w.input_dim && w.w_hh.size() == g * w.hidden_dim &&
           w.b_ih.size() == g && w.b_hh.size() == g;
  };
  if (!layer_ok(m.layer1) || !layer_ok(m.layer2) || m.layer2.input_dim != m.layer1.hidden_dim ||
      m.layer2.hidden_dim != m.layer1.hidden_dim || m.dense_w.size() != m.layer2.hidden_dim) {
    throw Error(ErrorCode::ShapeMismatch, "GRU model arrays are inconsistent with its dimensions");
  }
}

void check_sequence(const GruHeadModel& m, const Sequence& seq) {
  check_shapes(m);
  if (seq.steps == 0) throw Error(ErrorCode::EmptySequence, "GRU input sequence is empty");
  if (seq.dim != m.input_dim() || seq.values.size() != seq.steps * seq.dim) {
    throw Error(ErrorCode::ShapeMismatch, "sequence features have dimension " + std::to_string(seq.dim) +
                                              ", model expects " + std::to_string(m.input_dim()));
  }
}

// Activations kept for backpropagation; h holds T+1 rows with the zero
// initial state in row 0.
struct LayerTrace {
  std::size_t hidden = 0;
  std::vector<double> r, z, n, hn, h;

  const double* state(std::size_t row) const { return h.data() + row * hidden; }
};

LayerTrace run_layer(const GruLayerWeights& w, const double* x, std::size_t steps) {
  const std::size_t hd = w.hidden_dim;
  const std::size_t g = 3 * hd;
  const auto& k = simd::active();
  LayerTrace tr;
  tr.hidden = hd;
  tr.r.resize(steps * hd);
  tr.z.resize(steps * hd);
  tr.n.resize(steps * hd);
  tr.hn.resize(steps * hd);
  tr.h.assign((steps + 1) * hd, 0.0);
  std::vector<double> gi(g), gh(g);
  for (std::size_t t = 0; t < steps; ++t) {
    gi = w.b_ih;
    gh = w.b_hh;
    k.gemv(w.w_ih.data(), g, w.input_dim, x + t * w.input_dim, gi.data());
    const double* hp = tr.state(t);
    k.gemv(w.w_hh.data(), g, hd, hp, gh.data());
    double* hcur = tr.h.data() + (t + 1) * hd;
    for (std::size_t j = 0; j < hd; ++j) {
      const double r = sigmoid(gi[j] + gh[j]);
      const double z = sigmoid(gi[hd + j] + gh[hd + j]);
      const double hn = gh[2 * hd + j];
      const double n = std::tanh(gi[2 * hd + j] + r * hn);
      const std::size_t idx = t * hd + j;
      tr.r[idx] = r;
      tr.z[idx] = z;
      tr.hn[idx] = hn;
      tr.n[idx] = n;
      hcur[j] = (1.0 - z) * n + z * hp[j];
    }
  }
  return tr;
}

// Gradient of one layer given dL/dh_t for every output step. Accumulates
// into `grad`; writes dL/dx_t into dx when non-null.
void backprop_layer(const GruLayerWeights& w, const double* x, std::size_t steps, const LayerTrace& tr,
                    const std::vector<double>& dh_out, GruLayerWeights& grad, std::vector<double>* dx) {
  const std::size_t hd = w.hidden_dim;
  const std::size_t g = 3 * hd;
  const auto& k = simd::active();
  std::vector<double> dh_next(hd, 0.0), dh_prev(hd), dgi(g), dgh(g);
  if (dx) dx->assign(steps * w.input_dim, 0.0);
  for (std::size_t t = steps; t-- > 0;) {
    const double* hp = tr.state(t);
    for (std::size_t j = 0; j < hd; ++j) {
      const std::size_t idx = t * hd + j;
      const double r = tr.r[idx], z = tr.z[idx], n = tr.n[idx], hn = tr.hn[idx];
      const double dh = dh_out[idx] + dh_next[j];
      const double dn = dh * (1.0 - z);
      const double dz = dh * (hp[j] - n);
      dh_prev[j] = dh * z;
      const double da_n = dn * (1.0 - n * n);
      const double da_r = da_n * hn * r * (1.0 - r);
      const double da_z = dz * z * (1.0 - z);
      dgi[j] = da_r;
      dgi[hd + j] = da_z;
      dgi[2 * hd + j] = da_n;
      dgh[j] = da_r;
      dgh[hd + j] = da_z;
      dgh[2 * hd + j] = da_n * r;
    }
    const double* xt = x + t * w.input_dim;
    k.ger(grad.w_ih.data(), g, w.input_dim, dgi.data(), xt);
    k.ger(grad.w_hh.data(), g, hd, dgh.data(), hp);
    k.axpy(1.0, dgi.data(), grad.b_ih.data(), g);
    k.axpy(1.0, dgh.data(), grad.b_hh.data(), g);
    k.gemv_t(w.w_hh.data(), g, hd, dgh.data(), dh_prev.data());
    if (dx) k.gemv_t(w.w_ih.data(), g, w.input_dim, dgi.data(), dx->data() + t * w.input_dim);
    dh_next.swap(dh_prev);
  }
}

// Inverted-dropout scale factors (0 or 1/(1-p)) for both layer outputs.
struct Masks {
  std::vector<double> m1, m2;
};

Masks make_masks(const GruHeadModel& m, std::size_t steps, Mode mode, std::uint64_t seed) {
  const std::size_t count = steps * m.hidden_dim();
  Masks out{std::vector<double>(count, 1.0), std::vector<double>(count, 1.0)};
  if (mode == Mode::Inference) return out;
  core::Rng rng(core::mix_seed(seed, 0x64726f70));
  const auto fill = [&](std::vector<double>& mask, double p) {
    if (p == 0.0) return;
    const double keep = 1.0 / (1.0 - p);
    for (double& v : mask) v = rng.uniform01() < p ? 0.0 : keep;
  };
  fill(out.m1, m.dropout1);
  fill(out.m2, m.dropout2);
  return out;
}

struct ForwardTrace {
  Masks masks;
  LayerTrace l1, l2;
  std::vector<double> x2;  // layer1 output after dropout
  std::vector<double> d2;  // layer2 output after dropout
  std::vector<double> y;
};

ForwardTrace run_model(const GruHeadModel& m, const Sequence& seq, Mode mode, std::uint64_t seed) {
  check_sequence(m, seq);
  const std::size_t steps = seq.steps;
  const std::size_t hd = m.hidden_dim();
  ForwardTrace tr;
  tr.masks = make_masks(m, steps, mode, seed);
  tr.l1 = run_layer(m.layer1, seq.values.data(), steps);
  tr.x2.resize(steps * hd);
  for (std::size_t i = 0; i < tr.x2.size(); ++i) tr.x2[i] = tr.l1.h[hd + i] * tr.masks.m1[i];
  tr.l2 = run_layer(m.layer2, tr.x2.data(), steps);
  tr.d2.resize(steps * hd);
  for (std::size_t i = 0; i < tr.d2.size(); ++i) tr.d2[i] = tr.l2.h[hd + i] * tr.masks.m2[i];
  tr.y.resize(steps);
  const auto& k = simd::active();
  for (std::size_t t = 0; t < steps; ++t) {
    tr.y[t] = sigmoid(k.dot(m.dense_w.data(), tr.d2.data() + t * hd, hd) + m.dense_b);
  }
  return tr;
}

}  // namespace

std::vector<double> gru_cell_step(std::span<const double> x, std::span<const double> h, const GruLayerWeights& w) {
  if (x.size() != w.input_dim || h.size() != w.hidden_dim || w.w_ih.size() != 3 * w.hidden_dim * w.input_dim ||
      w.w_hh.size() != 3 * w.hidden_dim * w.hidden_dim || w.b_ih.size() != 3 * w.hidden_dim ||
      w.b_hh.size() != 3 * w.hidden_dim) {
    throw Error(ErrorCode::ShapeMismatch, "gru_cell_step: input " + std::to_string(x.size()) + ", hidden " +
                                              std::to_string(h.size()) + " do not match weights " +
                                              std::to_string(w.input_dim) + "x" + std::to_string(w.hidden_dim));
  }
  const std::size_t hd = w.hidden_dim;
  const auto& k = simd::active();
  std::vector<double> gi = w.b_ih, gh = w.b_hh;
  k.gemv(w.w_ih.data(), 3 * hd, w.input_dim, x.data(), gi.data());
  k.gemv(w.w_hh.data(), 3 * hd, hd, h.data(), gh.data());
  std::vector<double> out(hd);
  for (std::size_t j = 0; j < hd; ++j) {
    const double r = sigmoid(gi[j] + gh[j]);
    const double z = sigmoid(gi[hd + j] + gh[hd + j]);
    const double n = std::tanh(gi[2 * hd + j] + r * gh[2 * hd + j]);
    out[j] = (1.0 - z) * n + z * h[j];
  }
  return out;
}

std::vector<double> forward(const GruHeadModel& model, const Sequence& seq, Mode mode, std::uint64_t seed) {
  return run_model(model, seq, mode, seed).y;
}

std::vector<QualityScore> forward(const GruHeadModel& model, std::span<const FeatureVector> seq, Mode mode,
                                  std::uint64_t seed) {
  if (seq.empty()) throw Error(ErrorCode::EmptySequence, "GRU input sequence is empty");
  const auto y = forward(model, Sequence::from_features(seq), mode, seed);
  std::vector<QualityScore> out;
  out.reserve(y.size());
  for (double v : y) out.emplace_back(v);
  return out;
}

double loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw Error(ErrorCode::LengthMismatch, "loss: " + std::to_string(pred.size()) + " predictions vs " +
                                               std::to_string(target.size()) + " targets");
  }
  if (pred.empty()) throw Error(ErrorCode::EmptySequence, "loss over an empty sequence");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

Gradients backward(const GruHeadModel& model, const Sequence& seq, std::span<const double> target,
                   std::uint64_t seed) {
  const ForwardTrace tr = run_model(model, seq, Mode::Training, seed);
  const std::size_t steps = seq.steps;
  const std::size_t hd = model.hidden_dim();
  Gradients g;
  g.loss = loss(tr.y, target);
  g.layer1 = GruLayerWeights::zeros(model.layer1.input_dim, hd);
  g.layer2 = GruLayerWeights::zeros(hd, hd);
  g.dense_w.assign(hd, 0.0);

  const auto& k = simd::active();
  std::vector<double> dh2(steps * hd, 0.0);
  const double scale = 2.0 / static_cast<double>(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const double y = tr.y[t];
    const double d_out = scale * (y - target[t]) * y * (1.0 - y);
    k.axpy(d_out, tr.d2.data() + t * hd, g.dense_w.data(), hd);
    g.dense_b += d_out;
    for (std::size_t j = 0; j < hd; ++j) dh2[t * hd + j] = d_out * model.dense_w[j] * tr.masks.m2[t * hd + j];
  }

  std::vector<double> dx2;
  backprop_layer(model.layer2, tr.x2.data(), steps, tr.l2, dh2, g.layer2, &dx2);
  for (std::size_t i = 0; i < dx2.size(); ++i) dx2[i] *= tr.masks.m1[i];
  backprop_layer(model.layer1, seq.values.data(), steps, tr.l1, dx2, g.layer1, nullptr);
  return g;
}

// ---- float32 inference -----------------------------------------------------

GruInferenceF32::GruInferenceF32(const GruHeadModel& model) {
  model.validate();
  const auto convert = [](const GruLayerWeights& w) {
    return Layer{w.input_dim,
                 w.hidden_dim,
                 std::vector<float>(w.w_ih.begin(), w.w_ih.end()),
                 std::vector<float>(w.w_hh.begin(), w.w_hh.end()),
                 std::vector<float>(w.b_ih.begin(), w.b_ih.end()),
                 std::vector<float>(w.b_hh.begin(), w.b_hh.end())};
  };
  layer1_ = convert(model.layer1);
  layer2_ = convert(model.layer2);
  dense_w_.assign(model.dense_w.begin(), model.dense_w.end());
  dense_b_ = static_cast<float>(model.dense_b);
}

std::vector<double> GruInferenceF32::run(const Sequence& seq) const {
  if (seq.steps == 0) throw Error(ErrorCode::EmptySequence, "GRU input sequence is empty");
  if (seq.dim != layer1_.input_dim || seq.values.size() != seq.steps * seq.dim) {
    throw Error(ErrorCode::ShapeMismatch, "sequence dimension does not match the model");
  }
  const std::size_t hd = layer1_.hidden_dim;
  const auto& k = simd::active();
  std::vector<float> h1(hd, 0.0f), h2(hd, 0.0f), x(seq.dim), gi(3 * hd), gh(3 * hd);
  const auto step = [&](const Layer& w, const float* in, std::vector<float>& h) {
    gi = w.b_ih;
    gh = w.b_hh;
    k.gemv_f32(w.w_ih.data(), 3 * hd, w.input_dim, in, gi.data());
    k.gemv_f32(w.w_hh.data(), 3 * hd, hd, h.data(), gh.data());
    for (std::size_t j = 0; j < hd; ++j) {
      const float r = sigmoid(gi[j] + gh[j]);
      const float z = sigmoid(gi[hd + j] + gh[hd + j]);
      const float n = std::tanh(gi[2 * hd + j] + r * gh[2 * hd + j]);
      h[j] = (1.0f - z) * n + z * h[j];
    }
  };
  std::vector<double> out(seq.steps);
  for (std::size_t t = 0; t < seq.steps; ++t) {
    const auto row = seq.row(t);
    std::copy(row.begin(), row.end(), x.begin());
    step(layer1_, x.data(), h1);
    step(layer2_, h1.data(), h2);
    out[t] = sigmoid(static_cast<double>(k.dot_f32(dense_w_.data(), h2.data(), hd) + dense_b_));
  }
  return out;
}

}  // namespace keyframe::gru
