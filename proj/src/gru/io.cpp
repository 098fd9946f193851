#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "keyframe/gru.hpp"

namespace keyframe::gru {
namespace {

using nlohmann::json;

constexpr const char* kFormatName = "keyframe-gru-head";

json layer_to_json(const GruLayerWeights& w) {
  return json{{"w_ih", w.w_ih}, {"w_hh", w.w_hh}, {"b_ih", w.b_ih}, {"b_hh", w.b_hh}};
}

std::vector<double> array_field(const json& obj, const char* key, std::size_t expected, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_array()) {
    throw Error(ErrorCode::ShapeMismatch, where + "." + key + " is missing or not an array");
  }
  const json& a = obj[key];
  if (a.size() != expected) {
    throw Error(ErrorCode::ShapeMismatch, where + "." + key + " has " + std::to_string(a.size()) +
                                              " values, expected " + std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(a.size());
  for (const auto& v : a) {
    if (!v.is_number()) throw Error(ErrorCode::ShapeMismatch, where + "." + key + " contains a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

GruLayerWeights layer_from_json(const json& obj, std::size_t input_dim, std::size_t hidden_dim,
                                const std::string& where) {
  GruLayerWeights w;
  w.input_dim = input_dim;
  w.hidden_dim = hidden_dim;
  w.w_ih = array_field(obj, "w_ih", 3 * hidden_dim * input_dim, where);
  w.w_hh = array_field(obj, "w_hh", 3 * hidden_dim * hidden_dim, where);
  w.b_ih = array_field(obj, "b_ih", 3 * hidden_dim, where);
  w.b_hh = array_field(obj, "b_hh", 3 * hidden_dim, where);
  return w;
}

std::size_t dim_field(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number_unsigned() || doc[key].get<std::size_t>() == 0) {
    throw Error(ErrorCode::ShapeMismatch, std::string("weights field '") + key + "' must be a positive integer");
  }
  return doc[key].get<std::size_t>();
}

}  // namespace

std::string serialize_weights(const GruHeadModel& model) {
  model.validate();
  json doc;
  doc["format"] = kFormatName;
  doc["format_version"] = kWeightsFormatVersion;
  doc["input_dim"] = model.layer1.input_dim;
  doc["hidden_dim"] = model.layer1.hidden_dim;
  doc["dropout1"] = model.dropout1;
  doc["dropout2"] = model.dropout2;
  doc["layer1"] = layer_to_json(model.layer1);
  doc["layer2"] = layer_to_json(model.layer2);
  doc["dense"] = json{{"w", model.dense_w}, {"b", model.dense_b}};
  // nlohmann writes the shortest decimal that round-trips each double.
  return doc.dump() + "\n";
}

GruHeadModel parse_weights(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::IoError, std::string("weights file is truncated or malformed: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
    throw Error(ErrorCode::FormatVersionMismatch, "weights document has no format_version");
  }
  if (doc["format_version"].get<int>() != kWeightsFormatVersion) {
    throw Error(ErrorCode::FormatVersionMismatch, "weights format_version " + doc["format_version"].dump() +
                                                      " is not supported (expected " +
                                                      std::to_string(kWeightsFormatVersion) + ")");
  }
  const std::size_t input_dim = dim_field(doc, "input_dim");
  const std::size_t hidden_dim = dim_field(doc, "hidden_dim");
  for (const char* key : {"dropout1", "dropout2"}) {
    if (!doc.contains(key) || !doc[key].is_number()) {
      throw Error(ErrorCode::FormatVersionMismatch, std::string("weights document lacks '") + key + "'");
    }
  }
  for (const char* key : {"layer1", "layer2", "dense"}) {
    if (!doc.contains(key) || !doc[key].is_object()) {
      throw Error(ErrorCode::ShapeMismatch, std::string("weights document lacks object '") + key + "'");
    }
  }

  GruHeadModel m;
  m.layer1 = layer_from_json(doc["layer1"], input_dim, hidden_dim, "layer1");
  m.layer2 = layer_from_json(doc["layer2"], hidden_dim, hidden_dim, "layer2");
  m.dense_w = array_field(doc["dense"], "w", hidden_dim, "dense");
  if (!doc["dense"].contains("b") || !doc["dense"]["b"].is_number()) {
    throw Error(ErrorCode::ShapeMismatch, "dense.b is missing");
  }
  m.dense_b = doc["dense"]["b"].get<double>();
  m.dropout1 = doc["dropout1"].get<double>();
  m.dropout2 = doc["dropout2"].get<double>();
  m.validate();
  return m;
}

void save_weights(const GruHeadModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_weights(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

GruHeadModel load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open weights file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "failed reading " + path.string());
  return parse_weights(ss.str());
}

}  // namespace keyframe::gru
