#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "graph.hpp"
#include "keyframe/core.hpp"
#include "keyframe/simd/kernels.hpp"

namespace keyframe::classifier::onnx {
namespace {

using Shape = std::vector<std::int64_t>;
using Inputs = std::vector<const Tensor*>;  // nullptr for omitted optional inputs

[[noreturn]] void fail(const Node& n, const std::string& what) {
  throw Error(ErrorCode::InferenceFailure, n.op_type + " '" + n.name + "': " + what);
}

const Tensor& need(const Node& n, const Inputs& in, std::size_t k) {
  if (k >= in.size() || in[k] == nullptr) fail(n, "missing input " + std::to_string(k));
  return *in[k];
}

const Tensor& need_float(const Node& n, const Inputs& in, std::size_t k) {
  const Tensor& t = need(n, in, k);
  if (t.type != Tensor::Type::Float) fail(n, "input " + std::to_string(k) + " must be float");
  return t;
}

std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, std::int64_t d) { return a * static_cast<std::size_t>(d); });
}

std::int64_t normalize_axis(const Node& n, std::int64_t axis, std::size_t rank) {
  const auto r = static_cast<std::int64_t>(rank);
  if (axis < -r || axis >= r) fail(n, "axis " + std::to_string(axis) + " out of range");
  return axis < 0 ? axis + r : axis;
}

std::vector<std::int64_t> int_values(const Node& n, const Tensor& t) {
  if (t.type != Tensor::Type::Int64) fail(n, "expected an int64 tensor");
  return t.i;
}

// ---- elementwise -------------------------------------------------------

Tensor unary(const Tensor& x, const std::function<float(float)>& f) {
  Tensor y = Tensor::floats(x.shape, std::vector<float>(x.f.size()));
  std::transform(x.f.begin(), x.f.end(), y.f.begin(), f);
  return y;
}

Shape broadcast_shape(const Node& n, const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::int64_t da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
    const std::int64_t db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
    if (da != db && da != 1 && db != 1) fail(n, "shapes are not broadcastable");
    out[k] = std::max(da, db);
  }
  return out;
}

// Element strides of `s` viewed at the broadcast rank; broadcast dims get 0.
std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = s.size(); k-- > 0;) {
    const std::size_t ok = k + (out.size() - s.size());
    strides[ok] = s[k] == 1 ? 0 : stride;
    stride *= static_cast<std::size_t>(s[k]);
  }
  return strides;
}

template <typename T, typename Op>
std::vector<T> broadcast_apply(const Shape& out, const std::vector<T>& a, const Shape& as, const std::vector<T>& b,
                               const Shape& bs, Op op) {
  const std::size_t total = numel(out);
  std::vector<T> result(total);
  if (as == out && bs == out) {
    for (std::size_t i = 0; i < total; ++i) result[i] = op(a[i], b[i]);
    return result;
  }
  const auto sa = broadcast_strides(as, out);
  const auto sb = broadcast_strides(bs, out);
  std::vector<std::size_t> idx(out.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    result[i] = op(a[ia], b[ib]);
    for (std::size_t k = out.size(); k-- > 0;) {
      if (++idx[k] < static_cast<std::size_t>(out[k])) {
        ia += sa[k];
        ib += sb[k];
        break;
      }
      ia -= sa[k] * (idx[k] - 1);
      ib -= sb[k] * (idx[k] - 1);
      idx[k] = 0;
    }
  }
  return result;
}

Tensor binary(const Node& n, const Inputs& in, char op) {
  const Tensor& a = need(n, in, 0);
  const Tensor& b = need(n, in, 1);
  if (a.type != b.type) fail(n, "mixed operand types");
  const Shape out = broadcast_shape(n, a.shape, b.shape);
  if (a.type == Tensor::Type::Int64) {
    auto f = [op](std::int64_t x, std::int64_t y) -> std::int64_t {
      switch (op) {
        case '+': return x + y;
        case '-': return x - y;
        case '*': return x * y;
        default: return y == 0 ? 0 : x / y;
      }
    };
    return Tensor::ints(out, broadcast_apply<std::int64_t>(out, a.i, a.shape, b.i, b.shape, f));
  }
  auto f = [op](float x, float y) -> float {
    switch (op) {
      case '+': return x + y;
      case '-': return x - y;
      case '*': return x * y;
      default: return x / y;
    }
  };
  return Tensor::floats(out, broadcast_apply<float>(out, a.f, a.shape, b.f, b.shape, f));
}

// ---- convolution and pooling -------------------------------------------

struct Window2d {
  std::int64_t kh, kw, sh, sw, dh, dw, pt, pl, pb, pr;
  std::int64_t out_h, out_w;
};

Window2d window(const Node& n, std::int64_t h, std::int64_t w, std::int64_t kh, std::int64_t kw) {
  Window2d g{};
  g.kh = kh;
  g.kw = kw;
  auto strides = n.attr_ints("strides");
  auto dil = n.attr_ints("dilations");
  auto pads = n.attr_ints("pads");
  g.sh = strides.size() == 2 ? strides[0] : 1;
  g.sw = strides.size() == 2 ? strides[1] : 1;
  g.dh = dil.size() == 2 ? dil[0] : 1;
  g.dw = dil.size() == 2 ? dil[1] : 1;
  if (pads.size() == 4) {
    g.pt = pads[0];
    g.pl = pads[1];
    g.pb = pads[2];
    g.pr = pads[3];
  }
  const std::string auto_pad = n.attr_string("auto_pad", "NOTSET");
  if (auto_pad == "SAME_UPPER" || auto_pad == "SAME_LOWER") {
    auto same = [](std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t d, std::int64_t& lo, std::int64_t& hi,
                   bool upper) {
      const std::int64_t out = (in + s - 1) / s;
      const std::int64_t total = std::max<std::int64_t>(0, (out - 1) * s + (k - 1) * d + 1 - in);
      lo = upper ? total / 2 : total - total / 2;
      hi = total - lo;
    };
    same(h, kh, g.sh, g.dh, g.pt, g.pb, auto_pad == "SAME_UPPER");
    same(w, kw, g.sw, g.dw, g.pl, g.pr, auto_pad == "SAME_UPPER");
  } else if (auto_pad == "VALID") {
    g.pt = g.pl = g.pb = g.pr = 0;
  }
  g.out_h = (h + g.pt + g.pb - g.dh * (kh - 1) - 1) / g.sh + 1;
  g.out_w = (w + g.pl + g.pr - g.dw * (kw - 1) - 1) / g.sw + 1;
  if (g.out_h <= 0 || g.out_w <= 0) fail(n, "window larger than padded input");
  return g;
}

Tensor conv(const Node& n, const Inputs& in) {
  const Tensor& x = need_float(n, in, 0);
  const Tensor& wt = need_float(n, in, 1);
  const Tensor* bias = in.size() > 2 ? in[2] : nullptr;
  if (x.shape.size() != 4 || wt.shape.size() != 4) fail(n, "only 2-D convolution is supported");
  const std::int64_t batch = x.shape[0], cin = x.shape[1], h = x.shape[2], w = x.shape[3];
  const std::int64_t cout = wt.shape[0], cin_g = wt.shape[1], kh = wt.shape[2], kw = wt.shape[3];
  const std::int64_t groups = n.attr_int("group", 1);
  if (cin != cin_g * groups || cout % groups != 0) fail(n, "channel/group mismatch");
  const Window2d g = window(n, h, w, kh, kw);
  const std::int64_t cout_g = cout / groups;
  const std::size_t cols = static_cast<std::size_t>(g.out_h * g.out_w);
  const std::size_t kdim = static_cast<std::size_t>(cin_g * kh * kw);

  Tensor y = Tensor::floats({batch, cout, g.out_h, g.out_w}, std::vector<float>(numel({batch, cout, g.out_h, g.out_w})));
  std::vector<float> patches(kdim * cols);
  const auto& kernels = simd::active();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t grp = 0; grp < groups; ++grp) {
      // im2col: row (c, i, j), column (oy, ox)
      std::size_t row = 0;
      for (std::int64_t c = 0; c < cin_g; ++c) {
        const float* plane = x.f.data() + ((b * cin + grp * cin_g + c) * h) * w;
        for (std::int64_t i = 0; i < kh; ++i) {
          for (std::int64_t j = 0; j < kw; ++j, ++row) {
            float* dst = patches.data() + row * cols;
            for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
              const std::int64_t iy = oy * g.sh - g.pt + i * g.dh;
              for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
                const std::int64_t ix = ox * g.sw - g.pl + j * g.dw;
                *dst++ = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane[iy * w + ix] : 0.0f;
              }
            }
          }
        }
      }
      float* out = y.f.data() + ((b * cout + grp * cout_g) * g.out_h) * g.out_w;
      const float* weights = wt.f.data() + grp * cout_g * static_cast<std::int64_t>(kdim);
      kernels.gemm_f32(weights, patches.data(), out, static_cast<std::size_t>(cout_g), kdim, cols);
      if (bias != nullptr) {
        for (std::int64_t m = 0; m < cout_g; ++m) {
          const float bv = bias->f[static_cast<std::size_t>(grp * cout_g + m)];
          for (std::size_t k = 0; k < cols; ++k) out[m * static_cast<std::int64_t>(cols) + static_cast<std::int64_t>(k)] += bv;
        }
      }
    }
  }
  return y;
}

Tensor pool(const Node& n, const Inputs& in, bool is_max) {
  const Tensor& x = need_float(n, in, 0);
  if (x.shape.size() != 4) fail(n, "only 2-D pooling is supported");
  auto ks = n.attr_ints("kernel_shape");
  if (ks.size() != 2) fail(n, "kernel_shape must have two entries");
  const std::int64_t batch = x.shape[0], ch = x.shape[1], h = x.shape[2], w = x.shape[3];
  const Window2d g = window(n, h, w, ks[0], ks[1]);
  const bool include_pad = n.attr_int("count_include_pad", 0) != 0;
  Tensor y = Tensor::floats({batch, ch, g.out_h, g.out_w}, std::vector<float>(numel({batch, ch, g.out_h, g.out_w})));
  std::size_t o = 0;
  for (std::int64_t p = 0; p < batch * ch; ++p) {
    const float* plane = x.f.data() + p * h * w;
    for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
      for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
        float acc = is_max ? -std::numeric_limits<float>::infinity() : 0.0f;
        std::int64_t count = 0;
        for (std::int64_t i = 0; i < g.kh; ++i) {
          for (std::int64_t j = 0; j < g.kw; ++j) {
            const std::int64_t iy = oy * g.sh - g.pt + i * g.dh;
            const std::int64_t ix = ox * g.sw - g.pl + j * g.dw;
            const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
            if (inside) {
              acc = is_max ? std::max(acc, plane[iy * w + ix]) : acc + plane[iy * w + ix];
              ++count;
            } else if (include_pad) {
              ++count;
            }
          }
        }
        y.f[o++] = is_max ? acc : (count > 0 ? acc / static_cast<float>(count) : 0.0f);
      }
    }
  }
  return y;
}

Tensor global_average_pool(const Node& n, const Inputs& in) {
  const Tensor& x = need_float(n, in, 0);
  if (x.shape.size() < 3) fail(n, "expects N x C x spatial input");
  const std::size_t planes = static_cast<std::size_t>(x.shape[0] * x.shape[1]);
  const std::size_t area = x.numel() / planes;
  Shape out = {x.shape[0], x.shape[1]};
  out.resize(x.shape.size(), 1);
  Tensor y = Tensor::floats(out, std::vector<float>(planes));
  for (std::size_t p = 0; p < planes; ++p) {
    double s = 0.0;
    for (std::size_t k = 0; k < area; ++k) s += x.f[p * area + k];
    y.f[p] = static_cast<float>(s / static_cast<double>(area));
  }
  return y;
}

Tensor batch_norm(const Node& n, const Inputs& in) {
  const Tensor& x = need_float(n, in, 0);
  const Tensor& scale = need_float(n, in, 1);
  const Tensor& shift = need_float(n, in, 2);
  const Tensor& mean = need_float(n, in, 3);
  const Tensor& var = need_float(n, in, 4);
  const float eps = n.attr_float("epsilon", 1e-5f);
  if (x.shape.size() < 2) fail(n, "expects N x C x ... input");
  const std::size_t ch = static_cast<std::size_t>(x.shape[1]);
  const std::size_t area = x.numel() / (static_cast<std::size_t>(x.shape[0]) * ch);
  Tensor y = x;
  for (std::size_t k = 0; k < y.f.size(); ++k) {
    const std::size_t c = (k / area) % ch;
    y.f[k] = scale.f[c] * (x.f[k] - mean.f[c]) / std::sqrt(var.f[c] + eps) + shift.f[c];
  }
  return y;
}

// ---- dense ---------------------------------------------------------------

Tensor gemm(const Node& n, const Inputs& in) {
  const Tensor& a = need_float(n, in, 0);
  const Tensor& b = need_float(n, in, 1);
  const Tensor* c = in.size() > 2 ? in[2] : nullptr;
  if (a.shape.size() != 2 || b.shape.size() != 2) fail(n, "Gemm operands must be 2-D");
  const bool ta = n.attr_int("transA", 0) != 0;
  const bool tb = n.attr_int("transB", 0) != 0;
  const float alpha = n.attr_float("alpha", 1.0f);
  const float beta = n.attr_float("beta", 1.0f);
  const std::int64_t m = ta ? a.shape[1] : a.shape[0];
  const std::int64_t k = ta ? a.shape[0] : a.shape[1];
  const std::int64_t kb = tb ? b.shape[1] : b.shape[0];
  const std::int64_t nn = tb ? b.shape[0] : b.shape[1];
  if (k != kb) fail(n, "inner dimensions differ");

  std::vector<float> am(static_cast<std::size_t>(m * k)), bm(static_cast<std::size_t>(k * nn));
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t p = 0; p < k; ++p) am[i * k + p] = ta ? a.f[p * m + i] : a.f[i * k + p];
  for (std::int64_t p = 0; p < k; ++p)
    for (std::int64_t j = 0; j < nn; ++j) bm[p * nn + j] = tb ? b.f[j * k + p] : b.f[p * nn + j];

  Tensor y = Tensor::floats({m, nn}, std::vector<float>(static_cast<std::size_t>(m * nn), 0.0f));
  simd::active().gemm_f32(am.data(), bm.data(), y.f.data(), static_cast<std::size_t>(m), static_cast<std::size_t>(k),
                          static_cast<std::size_t>(nn));
  if (alpha != 1.0f)
    for (float& v : y.f) v *= alpha;
  if (c != nullptr) {
    const auto cb = broadcast_apply<float>(y.shape, y.f, y.shape, c->f, c->shape, [beta](float yv, float cv) {
      return yv + beta * cv;
    });
    y.f = cb;
  }
  return y;
}

Tensor matmul(const Node& n, const Inputs& in) {
  const Tensor& a = need_float(n, in, 0);
  const Tensor& b = need_float(n, in, 1);
  if (b.shape.size() != 2 || a.shape.empty()) fail(n, "only [..., K] x [K, N] MatMul is supported");
  const std::int64_t k = a.shape.back();
  if (b.shape[0] != k) fail(n, "inner dimensions differ");
  const std::int64_t nn = b.shape[1];
  const std::size_t rows = a.numel() / static_cast<std::size_t>(k);
  Shape out = a.shape;
  out.back() = nn;
  Tensor y = Tensor::floats(out, std::vector<float>(rows * static_cast<std::size_t>(nn), 0.0f));
  simd::active().gemm_f32(a.f.data(), b.f.data(), y.f.data(), rows, static_cast<std::size_t>(k),
                          static_cast<std::size_t>(nn));
  return y;
}

Tensor softmax(const Node& n, const Inputs& in, std::int64_t opset) {
  const Tensor& x = need_float(n, in, 0);
  const std::int64_t axis = normalize_axis(n, n.attr_int("axis", opset >= 13 ? -1 : 1), x.shape.size());
  std::size_t outer = 1, inner = 1, span = 1;
  if (opset >= 13) {
    for (std::int64_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(x.shape[k]);
    span = static_cast<std::size_t>(x.shape[axis]);
    for (std::size_t k = static_cast<std::size_t>(axis) + 1; k < x.shape.size(); ++k)
      inner *= static_cast<std::size_t>(x.shape[k]);
  } else {
    // Older opsets coerce to 2-D at `axis` and normalize each row.
    for (std::int64_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(x.shape[k]);
    span = x.numel() / outer;
  }
  Tensor y = x;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      auto at = [&](std::size_t s) -> float& { return y.f[(o * span + s) * inner + i]; };
      float top = -std::numeric_limits<float>::infinity();
      for (std::size_t s = 0; s < span; ++s) top = std::max(top, at(s));
      double sum = 0.0;
      for (std::size_t s = 0; s < span; ++s) {
        at(s) = std::exp(at(s) - top);
        sum += at(s);
      }
      for (std::size_t s = 0; s < span; ++s) at(s) = static_cast<float>(at(s) / sum);
    }
  }
  return y;
}

// ---- shape manipulation ----------------------------------------------------

Tensor with_shape(const Tensor& x, Shape shape) {
  Tensor y = x;
  y.shape = std::move(shape);
  return y;
}

Tensor flatten(const Node& n, const Inputs& in) {
  const Tensor& x = need(n, in, 0);
  std::int64_t axis = n.attr_int("axis", 1);
  if (axis < 0) axis += static_cast<std::int64_t>(x.shape.size());
  std::int64_t lead = 1;
  for (std::int64_t k = 0; k < axis; ++k) lead *= x.shape[k];
  return with_shape(x, {lead, static_cast<std::int64_t>(x.numel()) / std::max<std::int64_t>(lead, 1)});
}

Tensor reshape(const Node& n, const Inputs& in) {
  const Tensor& x = need(n, in, 0);
  Shape target = int_values(n, need(n, in, 1));
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] == 0) target[k] = k < x.shape.size() ? x.shape[k] : 1;
    if (target[k] == -1) {
      if (infer >= 0) fail(n, "more than one -1 in target shape");
      infer = static_cast<int>(k);
    } else {
      known *= target[k];
    }
  }
  if (infer >= 0) target[static_cast<std::size_t>(infer)] = static_cast<std::int64_t>(x.numel()) / known;
  if (numel(target) != x.numel()) fail(n, "element count changes");
  return with_shape(x, target);
}

std::vector<std::int64_t> axes_of(const Node& n, const Inputs& in, std::size_t input_index) {
  if (in.size() > input_index && in[input_index] != nullptr) return int_values(n, *in[input_index]);
  return n.attr_ints("axes");
}

Tensor unsqueeze(const Node& n, const Inputs& in) {
  const Tensor& x = need(n, in, 0);
  auto axes = axes_of(n, in, 1);
  const std::size_t rank = x.shape.size() + axes.size();
  for (auto& a : axes) a = normalize_axis(n, a, rank);
  std::sort(axes.begin(), axes.end());
  Shape out;
  std::size_t src = 0;
  for (std::size_t k = 0; k < rank; ++k) {
    if (std::binary_search(axes.begin(), axes.end(), static_cast<std::int64_t>(k))) {
      out.push_back(1);
    } else {
      out.push_back(x.shape[src++]);
    }
  }
  return with_shape(x, out);
}

Tensor squeeze(const Node& n, const Inputs& in) {
  const Tensor& x = need(n, in, 0);
  auto axes = axes_of(n, in, 1);
  for (auto& a : axes) a = normalize_axis(n, a, x.shape.size());
  Shape out;
  for (std::size_t k = 0; k < x.shape.size(); ++k) {
    const bool listed = std::find(axes.begin(), axes.end(), static_cast<std::int64_t>(k)) != axes.end();
    if (axes.empty() ? x.shape[k] == 1 : listed) continue;
    out.push_back(x.shape[k]);
  }
  return with_shape(x, out);
}

Tensor reduce_mean(const Node& n, const Inputs& in, std::int64_t opset) {
  const Tensor& x = need_float(n, in, 0);
  auto axes = opset >= 18 ? axes_of(n, in, 1) : n.attr_ints("axes");
  const bool keep = n.attr_int("keepdims", 1) != 0;
  const std::size_t rank = x.shape.size();
  std::vector<bool> reduce(rank, axes.empty());
  for (auto a : axes) reduce[static_cast<std::size_t>(normalize_axis(n, a, rank))] = true;

  Shape kept_shape(rank);
  for (std::size_t k = 0; k < rank; ++k) kept_shape[k] = reduce[k] ? 1 : x.shape[k];
  std::vector<double> acc(numel(kept_shape), 0.0);
  const auto out_strides = broadcast_strides(kept_shape, x.shape);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < x.f.size(); ++i) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < rank; ++k) o += idx[k] * out_strides[k];
    acc[o] += x.f[i];
    for (std::size_t k = rank; k-- > 0;) {
      if (++idx[k] < static_cast<std::size_t>(x.shape[k])) break;
      idx[k] = 0;
    }
  }
  const double count = static_cast<double>(x.numel()) / static_cast<double>(acc.size());
  std::vector<float> out(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k] / count);
  Shape shape;
  for (std::size_t k = 0; k < rank; ++k) {
    if (!reduce[k]) {
      shape.push_back(x.shape[k]);
    } else if (keep) {
      shape.push_back(1);
    }
  }
  return Tensor::floats(shape, std::move(out));
}

Tensor concat(const Node& n, const Inputs& in) {
  const Tensor& first = need(n, in, 0);
  const std::int64_t axis = normalize_axis(n, n.attr_int("axis", 0), first.shape.size());
  std::size_t outer = 1;
  for (std::int64_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(first.shape[k]);
  Shape out = first.shape;
  out[axis] = 0;
  for (const Tensor* t : in) {
    if (t == nullptr || t->type != first.type || t->shape.size() != first.shape.size()) fail(n, "inconsistent inputs");
    out[axis] += t->shape[axis];
  }
  Tensor y;
  y.type = first.type;
  y.shape = out;
  for (std::size_t o = 0; o < outer; ++o) {
    for (const Tensor* t : in) {
      const std::size_t chunk = t->numel() / outer;
      if (t->type == Tensor::Type::Float) {
        y.f.insert(y.f.end(), t->f.begin() + o * chunk, t->f.begin() + (o + 1) * chunk);
      } else {
        y.i.insert(y.i.end(), t->i.begin() + o * chunk, t->i.begin() + (o + 1) * chunk);
      }
    }
  }
  return y;
}

Tensor gather(const Node& n, const Inputs& in) {
  const Tensor& data = need(n, in, 0);
  const Tensor& indices = need(n, in, 1);
  const auto idx = int_values(n, indices);
  const std::int64_t axis = normalize_axis(n, n.attr_int("axis", 0), data.shape.size());
  std::size_t outer = 1, inner = 1;
  for (std::int64_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(data.shape[k]);
  for (std::size_t k = static_cast<std::size_t>(axis) + 1; k < data.shape.size(); ++k)
    inner *= static_cast<std::size_t>(data.shape[k]);
  const std::int64_t dim = data.shape[axis];

  Shape out(data.shape.begin(), data.shape.begin() + axis);
  out.insert(out.end(), indices.shape.begin(), indices.shape.end());
  out.insert(out.end(), data.shape.begin() + axis + 1, data.shape.end());
  Tensor y;
  y.type = data.type;
  y.shape = out;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::int64_t j : idx) {
      if (j < 0) j += dim;
      if (j < 0 || j >= dim) fail(n, "index out of range");
      const std::size_t base = (o * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)) * inner;
      if (data.type == Tensor::Type::Float) {
        y.f.insert(y.f.end(), data.f.begin() + base, data.f.begin() + base + inner);
      } else {
        y.i.insert(y.i.end(), data.i.begin() + base, data.i.begin() + base + inner);
      }
    }
  }
  return y;
}

Tensor cast(const Node& n, const Inputs& in) {
  const Tensor& x = need(n, in, 0);
  const std::int64_t to = n.attr_int("to", 1);
  if (to == 1) {
    if (x.type == Tensor::Type::Float) return x;
    return Tensor::floats(x.shape, std::vector<float>(x.i.begin(), x.i.end()));
  }
  if (to == 7) {
    if (x.type == Tensor::Type::Int64) return x;
    std::vector<std::int64_t> v(x.f.size());
    std::transform(x.f.begin(), x.f.end(), v.begin(), [](float f) { return static_cast<std::int64_t>(f); });
    return Tensor::ints(x.shape, std::move(v));
  }
  fail(n, "unsupported cast target " + std::to_string(to));
}

Tensor constant(const Node& n) {
  auto it = n.attributes.find("value");
  if (it != n.attributes.end() && it->second.t) return *it->second.t;
  if (auto f = n.attributes.find("value_float"); f != n.attributes.end() && f->second.f) return Tensor::floats({}, {*f->second.f});
  if (auto f = n.attributes.find("value_floats"); f != n.attributes.end())
    return Tensor::floats({static_cast<std::int64_t>(f->second.floats.size())}, f->second.floats);
  if (auto i = n.attributes.find("value_int"); i != n.attributes.end() && i->second.i) return Tensor::ints({}, {*i->second.i});
  if (auto i = n.attributes.find("value_ints"); i != n.attributes.end())
    return Tensor::ints({static_cast<std::int64_t>(i->second.ints.size())}, i->second.ints);
  fail(n, "unsupported constant encoding");
}

Tensor clip(const Node& n, const Inputs& in) {
  const Tensor& x = need_float(n, in, 0);
  float lo = n.attr_float("min", -std::numeric_limits<float>::infinity());
  float hi = n.attr_float("max", std::numeric_limits<float>::infinity());
  if (in.size() > 1 && in[1] != nullptr) lo = in[1]->f.at(0);
  if (in.size() > 2 && in[2] != nullptr) hi = in[2]->f.at(0);
  return unary(x, [lo, hi](float v) { return std::min(std::max(v, lo), hi); });
}

const std::vector<std::string>& supported_ops() {
  static const std::vector<std::string> ops = {
      "Add",     "AveragePool", "BatchNormalization", "Cast",     "Clip",      "Concat",  "Constant",
      "Conv",    "Div",         "Dropout",            "Flatten",  "Gather",    "Gemm",    "GlobalAveragePool",
      "HardSigmoid", "HardSwish", "Identity",         "LeakyRelu", "MatMul",   "MaxPool", "Mul",
      "ReduceMean", "Relu",     "Reshape",            "Shape",    "Sigmoid",   "Softmax", "Squeeze",
      "Sub",     "Tanh",        "Unsqueeze",
  };
  return ops;
}

Tensor run_node(const Node& n, const Inputs& in, std::int64_t opset) {
  const std::string& op = n.op_type;
  if (op == "Conv") return conv(n, in);
  if (op == "BatchNormalization") return batch_norm(n, in);
  if (op == "Relu") return unary(need_float(n, in, 0), [](float v) { return v > 0.0f ? v : 0.0f; });
  if (op == "LeakyRelu") {
    const float alpha = n.attr_float("alpha", 0.01f);
    return unary(need_float(n, in, 0), [alpha](float v) { return v >= 0.0f ? v : alpha * v; });
  }
  if (op == "Sigmoid") return unary(need_float(n, in, 0), [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
  if (op == "Tanh") return unary(need_float(n, in, 0), [](float v) { return std::tanh(v); });
  if (op == "HardSigmoid") {
    const float alpha = n.attr_float("alpha", 0.2f), beta = n.attr_float("beta", 0.5f);
    return unary(need_float(n, in, 0), [=](float v) { return std::min(1.0f, std::max(0.0f, alpha * v + beta)); });
  }
  if (op == "HardSwish") {
    return unary(need_float(n, in, 0),
                 [](float v) { return v * std::min(1.0f, std::max(0.0f, v / 6.0f + 0.5f)); });
  }
  if (op == "Clip") return clip(n, in);
  if (op == "Add") return binary(n, in, '+');
  if (op == "Sub") return binary(n, in, '-');
  if (op == "Mul") return binary(n, in, '*');
  if (op == "Div") return binary(n, in, '/');
  if (op == "GlobalAveragePool") return global_average_pool(n, in);
  if (op == "MaxPool") return pool(n, in, true);
  if (op == "AveragePool") return pool(n, in, false);
  if (op == "ReduceMean") return reduce_mean(n, in, opset);
  if (op == "Flatten") return flatten(n, in);
  if (op == "Reshape") return reshape(n, in);
  if (op == "Squeeze") return squeeze(n, in);
  if (op == "Unsqueeze") return unsqueeze(n, in);
  if (op == "Concat") return concat(n, in);
  if (op == "Gather") return gather(n, in);
  if (op == "Cast") return cast(n, in);
  if (op == "Gemm") return gemm(n, in);
  if (op == "MatMul") return matmul(n, in);
  if (op == "Softmax") return softmax(n, in, opset);
  if (op == "Identity" || op == "Dropout") return need(n, in, 0);
  if (op == "Constant") return constant(n);
  if (op == "Shape") {
    const Tensor& x = need(n, in, 0);
    return Tensor::ints({static_cast<std::int64_t>(x.shape.size())}, x.shape);
  }
  throw Error(ErrorCode::UnsupportedFormat, "operator " + op + " is not supported");
}

}  // namespace

bool is_supported_op(const std::string& op_type) {
  const auto& ops = supported_ops();
  return std::find(ops.begin(), ops.end(), op_type) != ops.end();
}

std::unordered_map<std::string, Tensor> execute(const Graph& graph,
                                                const std::unordered_map<std::string, Tensor>& feeds) {
  std::unordered_map<std::string, TensorPtr> env = graph.initializers;
  for (const auto& [name, t] : feeds) env[name] = std::make_shared<const Tensor>(t);

  for (const Node& node : graph.nodes) {
    Inputs inputs;
    inputs.reserve(node.inputs.size());
    for (const std::string& name : node.inputs) {
      if (name.empty()) {
        inputs.push_back(nullptr);
        continue;
      }
      auto it = env.find(name);
      if (it == env.end()) {
        throw Error(ErrorCode::UnsupportedFormat, "node '" + node.name + "' reads '" + name +
                                                      "' before it is produced (graph not topologically sorted?)");
      }
      inputs.push_back(it->second.get());
    }
    Tensor out = run_node(node, inputs, graph.opset);
    if (!node.outputs.empty() && !node.outputs[0].empty()) {
      env[node.outputs[0]] = std::make_shared<const Tensor>(std::move(out));
    }
  }

  std::unordered_map<std::string, Tensor> results;
  for (const ValueInfo& o : graph.outputs) {
    auto it = env.find(o.name);
    if (it == env.end()) throw Error(ErrorCode::InferenceFailure, "graph output '" + o.name + "' was never produced");
    results.emplace(o.name, *it->second);
  }
  return results;
}

}  // namespace keyframe::classifier::onnx
