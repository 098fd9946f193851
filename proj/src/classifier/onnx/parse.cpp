#include <cstring>
#include <numeric>
#include <unordered_set>

#include "graph.hpp"
#include "keyframe/core.hpp"
#include "wire.hpp"

namespace keyframe::classifier::onnx {
namespace {

// TensorProto.DataType
constexpr std::int64_t kFloat = 1;
constexpr std::int64_t kInt32 = 6;
constexpr std::int64_t kInt64 = 7;
constexpr std::int64_t kDouble = 11;

[[noreturn]] void unsupported(const std::string& what) { throw Error(ErrorCode::UnsupportedFormat, what); }

Tensor parse_tensor(std::span<const std::uint8_t> bytes, std::string* name_out) {
  WireReader r(bytes);
  std::vector<std::int64_t> dims;
  std::int64_t data_type = 0;
  std::vector<float> float_data;
  std::vector<std::int64_t> int_data;
  std::vector<double> double_data;
  std::span<const std::uint8_t> raw;
  bool has_raw = false;
  std::string name;

  std::uint32_t field;
  WireType type;
  while (r.next(field, type)) {
    switch (field) {
      case 1: r.repeated_int64(type, dims); break;
      case 2: data_type = r.int64(); break;
      case 4: r.repeated_float(type, float_data); break;
      case 5: r.repeated_int64(type, int_data); break;  // int32_data, varint-encoded
      case 7: r.repeated_int64(type, int_data); break;
      case 8: name = r.string(); break;
      case 9: raw = r.bytes(); has_raw = true; break;
      case 10: r.repeated_double(type, double_data); break;
      case 14:
        if (r.int64() != 0) unsupported("tensor '" + name + "' uses external data, which is not supported");
        break;
      default: r.skip(type);
    }
  }
  if (name_out) *name_out = name;

  std::size_t count = 1;
  for (auto d : dims) {
    if (d < 0) unsupported("negative tensor dimension in '" + name + "'");
    count *= static_cast<std::size_t>(d);
  }

  Tensor t;
  t.shape = dims;
  if (data_type == kFloat || data_type == kDouble) {
    t.type = Tensor::Type::Float;
    if (has_raw) {
      const std::size_t elem = data_type == kFloat ? 4 : 8;
      if (raw.size() != count * elem) unsupported("raw_data size mismatch in '" + name + "'");
      t.f.resize(count);
      for (std::size_t k = 0; k < count; ++k) {
        if (elem == 4) {
          std::memcpy(&t.f[k], raw.data() + 4 * k, 4);
        } else {
          double v;
          std::memcpy(&v, raw.data() + 8 * k, 8);
          t.f[k] = static_cast<float>(v);
        }
      }
    } else if (data_type == kFloat) {
      t.f = std::move(float_data);
    } else {
      t.f.assign(double_data.begin(), double_data.end());
    }
    if (t.f.size() != count) unsupported("element count mismatch in '" + name + "'");
  } else if (data_type == kInt64 || data_type == kInt32) {
    t.type = Tensor::Type::Int64;
    if (has_raw) {
      const std::size_t elem = data_type == kInt64 ? 8 : 4;
      if (raw.size() != count * elem) unsupported("raw_data size mismatch in '" + name + "'");
      t.i.resize(count);
      for (std::size_t k = 0; k < count; ++k) {
        if (elem == 8) {
          std::memcpy(&t.i[k], raw.data() + 8 * k, 8);
        } else {
          std::int32_t v;
          std::memcpy(&v, raw.data() + 4 * k, 4);
          t.i[k] = v;
        }
      }
    } else {
      t.i = std::move(int_data);
    }
    if (t.i.size() != count) unsupported("element count mismatch in '" + name + "'");
  } else {
    unsupported("tensor '" + name + "' has unsupported data type " + std::to_string(data_type));
  }
  return t;
}

Attribute parse_attribute(std::span<const std::uint8_t> bytes, std::string& name) {
  WireReader r(bytes);
  Attribute a;
  std::uint32_t field;
  WireType type;
  while (r.next(field, type)) {
    switch (field) {
      case 1: name = r.string(); break;
      case 2: a.f = r.fixed32_float(); break;
      case 3: a.i = r.int64(); break;
      case 4: a.s = r.string(); break;
      case 5: a.t = parse_tensor(r.bytes(), nullptr); break;
      case 7: r.repeated_float(type, a.floats); break;
      case 8: r.repeated_int64(type, a.ints); break;
      default: r.skip(type);
    }
  }
  return a;
}

Node parse_node(std::span<const std::uint8_t> bytes) {
  WireReader r(bytes);
  Node n;
  std::uint32_t field;
  WireType type;
  while (r.next(field, type)) {
    switch (field) {
      case 1: n.inputs.push_back(r.string()); break;
      case 2: n.outputs.push_back(r.string()); break;
      case 3: n.name = r.string(); break;
      case 4: n.op_type = r.string(); break;
      case 5: {
        std::string key;
        Attribute a = parse_attribute(r.bytes(), key);
        n.attributes.emplace(std::move(key), std::move(a));
        break;
      }
      case 7: n.domain = r.string(); break;
      default: r.skip(type);
    }
  }
  return n;
}

std::vector<std::int64_t> parse_shape(std::span<const std::uint8_t> bytes) {
  std::vector<std::int64_t> dims;
  WireReader r(bytes);
  std::uint32_t field;
  WireType type;
  while (r.next(field, type)) {
    if (field != 1) {
      r.skip(type);
      continue;
    }
    WireReader dim(r.bytes());
    std::int64_t value = -1;
    std::uint32_t f2;
    WireType t2;
    while (dim.next(f2, t2)) {
      if (f2 == 1) {
        value = dim.int64();
      } else {
        dim.skip(t2);
      }
    }
    dims.push_back(value);
  }
  return dims;
}

ValueInfo parse_value_info(std::span<const std::uint8_t> bytes) {
  ValueInfo v;
  WireReader r(bytes);
  std::uint32_t field;
  WireType type;
  while (r.next(field, type)) {
    if (field == 1) {
      v.name = r.string();
    } else if (field == 2) {
      WireReader tp(r.bytes());
      std::uint32_t f2;
      WireType t2;
      while (tp.next(f2, t2)) {
        if (f2 != 1) {
          tp.skip(t2);
          continue;
        }
        WireReader tt(tp.bytes());
        std::uint32_t f3;
        WireType t3;
        while (tt.next(f3, t3)) {
          if (f3 == 2) {
            v.dims = parse_shape(tt.bytes());
          } else {
            tt.skip(t3);
          }
        }
      }
    } else {
      r.skip(type);
    }
  }
  return v;
}

void parse_graph(std::span<const std::uint8_t> bytes, Graph& g) {
  WireReader r(bytes);
  std::vector<ValueInfo> declared_inputs;
  std::uint32_t field;
  WireType type;
  while (r.next(field, type)) {
    switch (field) {
      case 1: g.nodes.push_back(parse_node(r.bytes())); break;
      case 5: {
        std::string name;
        Tensor t = parse_tensor(r.bytes(), &name);
        g.initializers[name] = std::make_shared<const Tensor>(std::move(t));
        break;
      }
      case 11: declared_inputs.push_back(parse_value_info(r.bytes())); break;
      case 12: g.outputs.push_back(parse_value_info(r.bytes())); break;
      default: r.skip(type);
    }
  }
  for (auto& in : declared_inputs) {
    if (!g.initializers.count(in.name)) g.inputs.push_back(std::move(in));
  }
}

}  // namespace

std::size_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::int64_t d) { return a * static_cast<std::size_t>(d); });
}

Tensor Tensor::floats(std::vector<std::int64_t> shape, std::vector<float> data) {
  Tensor t;
  t.type = Type::Float;
  t.shape = std::move(shape);
  t.f = std::move(data);
  return t;
}

Tensor Tensor::ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> data) {
  Tensor t;
  t.type = Type::Int64;
  t.shape = std::move(shape);
  t.i = std::move(data);
  return t;
}

std::int64_t Node::attr_int(const std::string& key, std::int64_t fallback) const {
  auto it = attributes.find(key);
  return it != attributes.end() && it->second.i ? *it->second.i : fallback;
}

float Node::attr_float(const std::string& key, float fallback) const {
  auto it = attributes.find(key);
  return it != attributes.end() && it->second.f ? *it->second.f : fallback;
}

std::vector<std::int64_t> Node::attr_ints(const std::string& key) const {
  auto it = attributes.find(key);
  return it != attributes.end() ? it->second.ints : std::vector<std::int64_t>{};
}

std::string Node::attr_string(const std::string& key, const std::string& fallback) const {
  auto it = attributes.find(key);
  return it != attributes.end() && it->second.s ? *it->second.s : fallback;
}

Graph parse_model(std::span<const std::uint8_t> bytes) {
  Graph g;
  bool have_graph = false;
  WireReader r(bytes);
  std::uint32_t field;
  WireType type;
  while (r.next(field, type)) {
    if (field == 7 && type == WireType::LengthDelimited) {
      parse_graph(r.bytes(), g);
      have_graph = true;
    } else if (field == 8 && type == WireType::LengthDelimited) {
      WireReader op(r.bytes());
      std::string domain;
      std::int64_t version = 0;
      std::uint32_t f2;
      WireType t2;
      while (op.next(f2, t2)) {
        if (f2 == 1) {
          domain = op.string();
        } else if (f2 == 2) {
          version = op.int64();
        } else {
          op.skip(t2);
        }
      }
      if (domain.empty() || domain == "ai.onnx") g.opset = version;
    } else {
      r.skip(type);
    }
  }
  if (!have_graph || g.nodes.empty()) unsupported("file contains no ONNX graph");
  return g;
}

}  // namespace keyframe::classifier::onnx
