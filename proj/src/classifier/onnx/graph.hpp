#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace keyframe::classifier::onnx {

struct Tensor {
  enum class Type { Float, Int64 };

  Type type = Type::Float;
  std::vector<std::int64_t> shape;
  std::vector<float> f;
  std::vector<std::int64_t> i;

  std::size_t numel() const;
  static Tensor floats(std::vector<std::int64_t> shape, std::vector<float> data);
  static Tensor ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> data);
};

using TensorPtr = std::shared_ptr<const Tensor>;

struct Attribute {
  std::optional<float> f;
  std::optional<std::int64_t> i;
  std::optional<std::string> s;
  std::optional<Tensor> t;
  std::vector<float> floats;
  std::vector<std::int64_t> ints;
};

struct Node {
  std::string op_type;
  std::string name;
  std::string domain;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, Attribute> attributes;

  std::int64_t attr_int(const std::string& key, std::int64_t fallback) const;
  float attr_float(const std::string& key, float fallback) const;
  std::vector<std::int64_t> attr_ints(const std::string& key) const;
  std::string attr_string(const std::string& key, const std::string& fallback) const;
  bool has_attr(const std::string& key) const { return attributes.count(key) != 0; }
};

struct ValueInfo {
  std::string name;
  std::vector<std::int64_t> dims;  // -1 for symbolic or missing dimensions
};

struct Graph {
  std::int64_t opset = 0;  // default-domain opset version
  std::vector<Node> nodes;
  std::unordered_map<std::string, TensorPtr> initializers;
  std::vector<ValueInfo> inputs;  // graph inputs that are not initializers
  std::vector<ValueInfo> outputs;
};

Graph parse_model(std::span<const std::uint8_t> bytes);

/// Runs the graph on the named feeds and returns every graph output.
/// Throws keyframe::Error(UnsupportedFormat) for unknown operators and
/// InferenceFailure for runtime shape errors.
std::unordered_map<std::string, Tensor> execute(const Graph& graph,
                                                const std::unordered_map<std::string, Tensor>& feeds);

/// Operator types execute() understands.
bool is_supported_op(const std::string& op_type);

}  // namespace keyframe::classifier::onnx
