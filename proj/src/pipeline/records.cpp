#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <rapidjson/error/en.h>
#include <rapidjson/reader.h>

#include "keyframe/pipeline.hpp"

namespace keyframe::pipeline {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const char* const kProbKeys[] = {"p0", "p1", "p2", "p3", "p4"};
const char* const kRawKeys[] = {"v0", "v1", "v2", "v3", "v4"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw Error(ErrorCode::InvalidArgument, where + ": field '" + key + "' is missing or not a number");
  }
  return obj[key].get<double>();
}

std::size_t index_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number_unsigned()) {
    throw Error(ErrorCode::InvalidArgument, where + ": field '" + key + "' must be a non-negative integer");
  }
  return obj[key].get<std::size_t>();
}

json parse_line(const std::string& line, const std::string& where) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, where + ": expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, where + ": " + e.what());
  }
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double_token(std::string_view tok, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::InvalidArgument, where + ": bad number '" + std::string(tok) + "'");
  }
  return v;
}

// Metric-only lines are flat objects and can number in the hundreds of
// thousands, so they go through RapidJSON's SAX reader instead of a DOM.
struct MetricLineHandler : rapidjson::BaseReaderHandler<rapidjson::UTF8<>, MetricLineHandler> {
  std::array<std::size_t, 2> indices{};  // transform_index, frame_index
  std::array<double, core::kNumClasses> probs{};
  unsigned seen = 0;  // bit per field: 0-1 indices, 2-6 probabilities
  int slot = -1;
  std::size_t depth = 0;
  bool top_level_object = false;
  std::string error;

  static constexpr unsigned kAllFields = (1u << (2 + core::kNumClasses)) - 1;

  static std::string field_name(int s) {
    return s == 0 ? "transform_index" : s == 1 ? "frame_index" : kProbKeys[s - 2];
  }
  bool complete() const { return error.empty() && top_level_object && seen == kAllFields; }
  std::string problem() const {
    if (!error.empty()) return error;
    if (!top_level_object) return "expected a JSON object";
    for (int b = 0; b < 2 + static_cast<int>(core::kNumClasses); ++b) {
      if (!(seen & (1u << b))) {
        return "field '" + field_name(b) + "' is missing or " + (b < 2 ? "not a non-negative integer" : "not a number");
      }
    }
    return "malformed record";
  }
  bool reject() {
    error = "field '" + field_name(slot) + "' is " + (slot < 2 ? "not a non-negative integer" : "not a number");
    return false;
  }
  bool store_index(std::uint64_t v) {
    if (depth == 1 && slot >= 0) {
      if (slot < 2) {
        indices[static_cast<std::size_t>(slot)] = static_cast<std::size_t>(v);
      } else {
        probs[static_cast<std::size_t>(slot - 2)] = static_cast<double>(v);
      }
      seen |= 1u << slot;
    }
    slot = -1;
    return true;
  }
  bool store_number(double v) {
    if (depth == 1 && slot >= 0) {
      if (slot < 2) return reject();
      probs[static_cast<std::size_t>(slot - 2)] = v;
      seen |= 1u << slot;
    }
    slot = -1;
    return true;
  }

  bool Default() {
    if (depth == 0) {
      error = "expected a JSON object";
      return false;
    }
    if (depth == 1 && slot >= 0) return reject();
    slot = -1;
    return true;
  }
  bool Uint(unsigned v) { return store_index(v); }
  bool Uint64(std::uint64_t v) { return store_index(v); }
  bool Int(int v) { return v >= 0 ? store_index(static_cast<std::uint64_t>(v)) : store_number(v); }
  bool Int64(std::int64_t v) { return v >= 0 ? store_index(static_cast<std::uint64_t>(v)) : store_number(static_cast<double>(v)); }
  bool Double(double v) { return store_number(v); }
  bool StartObject() {
    if (depth == 0) top_level_object = true;
    if (depth == 1 && slot >= 0) return reject();
    ++depth;
    slot = -1;
    return true;
  }
  bool EndObject(rapidjson::SizeType) {
    --depth;
    return true;
  }
  bool StartArray() {
    if (!Default()) return false;
    ++depth;
    return true;
  }
  bool EndArray(rapidjson::SizeType) {
    --depth;
    return true;
  }
  bool Key(const char* k, rapidjson::SizeType len, bool) {
    slot = -1;
    if (depth != 1) return true;
    const std::string_view key(k, len);
    if (key == "transform_index") {
      slot = 0;
    } else if (key == "frame_index") {
      slot = 1;
    } else if (len == 2 && k[0] == 'p' && k[1] >= '0' && k[1] < '0' + static_cast<int>(core::kNumClasses)) {
      slot = 2 + (k[1] - '0');
    }
    return true;
  }
};

}  // namespace

// ---- output records -----------------------------------------------------------

std::string record_to_json(const FrameRecord& r) {
  ordered_json j;
  j["frame_index"] = r.frame_index;
  for (std::size_t k = 0; k < core::kNumClasses; ++k) j[kProbKeys[k]] = r.probs[k];
  for (std::size_t k = 0; k < core::kNumClasses; ++k) j[kRawKeys[k]] = r.metric.aggregated[k];
  j["stable"] = r.metric.stable_in_original;
  j["selected_class"] = std::string(core::label_name(r.metric.selected_class));
  j["quality"] = r.metric.quality.value();
  if (r.gru_quality) j["gru_quality"] = *r.gru_quality;
  return j.dump();
}

void write_records(std::ostream& out, std::span<const FrameRecord> records) {
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

std::vector<FrameRecord> parse_records(std::istream& in) {
  std::vector<FrameRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const std::string where = "record line " + std::to_string(line_no);
    const json j = parse_line(line, where);
    std::array<double, core::kNumClasses> p{}, v{};
    for (std::size_t k = 0; k < core::kNumClasses; ++k) {
      p[k] = number(j, kProbKeys[k], where);
      v[k] = number(j, kRawKeys[k], where);
    }
    quality::FrameQuality fq;
    fq.aggregated = core::RawVector(v);
    if (!j.contains("stable") || !j["stable"].is_boolean()) {
      throw Error(ErrorCode::InvalidArgument, where + ": 'stable' must be a boolean");
    }
    fq.stable_in_original = j["stable"].get<bool>();
    if (!j.contains("selected_class") || !j["selected_class"].is_string()) {
      throw Error(ErrorCode::InvalidArgument, where + ": 'selected_class' must be a string");
    }
    fq.selected_class = core::parse_label(j["selected_class"].get<std::string>());
    fq.quality = core::QualityScore(number(j, "quality", where));
    FrameRecord r{index_field(j, "frame_index", where), ProbVector(p), fq, std::nullopt};
    if (j.contains("gru_quality")) r.gru_quality = number(j, "gru_quality", where);
    out.push_back(std::move(r));
  }
  return out;
}

// ---- metric-only input ------------------------------------------------------------

std::vector<std::vector<ProbVector>> parse_metric_input(std::istream& in) {
  struct Item {
    std::size_t t, i;
    std::array<double, core::kNumClasses> p;
  };
  std::vector<Item> items;
  std::size_t max_t = 0, max_i = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    MetricLineHandler h;
    rapidjson::Reader reader;
    rapidjson::StringStream ss(line.c_str());
    const auto result = reader.Parse<rapidjson::kParseFullPrecisionFlag | rapidjson::kParseStopWhenDoneFlag>(ss, h);
    std::string problem;
    if (result.IsError()) {
      problem = h.error.empty() ? std::string(rapidjson::GetParseError_En(result.Code())) + " at offset " +
                                      std::to_string(result.Offset())
                                : h.error;
    } else if (!h.complete()) {
      problem = h.problem();
    } else if (!blank(line.substr(ss.Tell()))) {
      problem = "trailing characters after the record";
    }
    if (!problem.empty()) {
      throw Error(ErrorCode::InvalidArgument, "metric input line " + std::to_string(line_no) + ": " + problem);
    }
    Item it{h.indices[0], h.indices[1], h.probs};
    max_t = std::max(max_t, it.t);
    max_i = std::max(max_i, it.i);
    items.push_back(it);
  }
  if (items.empty()) throw Error(ErrorCode::EmptySequence, "metric input has no records");

  const std::size_t transforms_n = max_t + 1, frames_n = max_i + 1;
  if (items.size() != transforms_n * frames_n) {
    throw Error(ErrorCode::LengthMismatch, "metric input has " + std::to_string(items.size()) + " records, expected " +
                                               std::to_string(transforms_n) + " transforms x " +
                                               std::to_string(frames_n) + " frames");
  }
  std::vector<std::vector<std::optional<ProbVector>>> grid(transforms_n,
                                                           std::vector<std::optional<ProbVector>>(frames_n));
  for (const auto& it : items) {
    auto& slot = grid[it.t][it.i];
    if (slot) {
      throw Error(ErrorCode::InvalidArgument, "duplicate record for transform " + std::to_string(it.t) + ", frame " +
                                                  std::to_string(it.i));
    }
    slot.emplace(it.p);
  }
  std::vector<std::vector<ProbVector>> out(transforms_n);
  for (std::size_t t = 0; t < transforms_n; ++t) {
    out[t].reserve(frames_n);
    for (std::size_t i = 0; i < frames_n; ++i) out[t].push_back(*grid[t][i]);
  }
  return out;
}

// ---- configuration ------------------------------------------------------------------

void PipelineConfig::validate() const {
  if (!model && !metric_input) throw Error(ErrorCode::InvalidArgument, "config needs a model or a metric-only input");
  if (!(keyframes.min_quality >= 0.0 && keyframes.min_quality <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "min_quality must be in [0,1]");
  }
  if (keyframes.top_k == 0) throw Error(ErrorCode::InvalidArgument, "top_k must be at least 1");
  if (workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be at least 1");
  if (catalogue.empty()) throw Error(ErrorCode::InvalidArgument, "catalogue must be 'default' or a path");
}

PipelineConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  if (!j.contains("format_version") || j["format_version"] != kConfigFormatVersion) {
    throw Error(ErrorCode::FormatVersionMismatch, "config format_version must be " +
                                                      std::to_string(kConfigFormatVersion));
  }
  PipelineConfig c;
  const auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw Error(ErrorCode::InvalidArgument, std::string("config: '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  c.model = opt_string("model");
  if (auto p = opt_string("metric_input")) c.metric_input = *p;
  if (auto p = opt_string("gru_weights")) c.gru_weights = *p;
  if (auto p = opt_string("catalogue")) c.catalogue = *p;
  if (j.contains("window")) c.window = index_field(j, "window", "config");
  if (j.contains("workers")) c.workers = index_field(j, "workers", "config");
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("keyframes")) {
    const json& k = j["keyframes"];
    if (!k.is_object()) throw Error(ErrorCode::InvalidArgument, "config: 'keyframes' must be an object");
    if (k.contains("min_quality")) c.keyframes.min_quality = number(k, "min_quality", "config.keyframes");
    if (k.contains("nms_radius")) c.keyframes.nms_radius = index_field(k, "nms_radius", "config.keyframes");
    if (k.contains("top_k")) c.keyframes.top_k = index_field(k, "top_k", "config.keyframes");
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

namespace {

ordered_json config_json(const PipelineConfig& c) {
  ordered_json j;
  j["format_version"] = kConfigFormatVersion;
  j["model"] = c.model ? ordered_json(*c.model) : ordered_json(nullptr);
  j["metric_input"] = c.metric_input ? ordered_json(c.metric_input->string()) : ordered_json(nullptr);
  j["catalogue"] = c.catalogue;
  j["window"] = c.window;
  j["gru_weights"] = c.gru_weights ? ordered_json(c.gru_weights->string()) : ordered_json(nullptr);
  j["keyframes"] = {{"min_quality", c.keyframes.min_quality},
                    {"nms_radius", c.keyframes.nms_radius},
                    {"top_k", c.keyframes.top_k}};
  j["workers"] = c.workers;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

std::string serialize_config(const PipelineConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

transforms::TtaCatalogue resolve_catalogue(const PipelineConfig& cfg) {
  if (cfg.catalogue == "default") return transforms::default_tta_catalogue();
  return transforms::load_catalogue(cfg.catalogue);
}

// ---- report -------------------------------------------------------------------------

std::string_view to_string(ScoreSource s) noexcept { return s == ScoreSource::Gru ? "gru" : "metric"; }

std::string report_to_json(const KeyframeReport& report, const PipelineConfig& cfg, ScoreSource source) {
  ordered_json j;
  j["format_version"] = 1;
  j["source"] = std::string(to_string(source));
  j["keyframes"] = ordered_json::array();
  for (const auto& k : report.keyframes) {
    j["keyframes"].push_back({{"frame_index", k.frame_index},
                              {"quality", k.quality},
                              {"selected_class", std::string(core::label_name(k.selected_class))},
                              {"source", std::string(to_string(k.source))}});
  }
  ordered_json meta;
  meta["frame_count"] = report.frame_count;
  meta["candidates"] = report.candidates;
  meta["none_above_threshold"] = report.none_above_threshold;
  meta["params"] = {{"min_quality", report.params.min_quality},
                    {"nms_radius", report.params.nms_radius},
                    {"top_k", report.params.top_k}};
  ordered_json echo = config_json(cfg);
  echo.erase("workers");  // results never depend on it
  meta["config"] = std::move(echo);
  meta["version"] = std::string(kVersion);
  j["metadata"] = std::move(meta);
  return j.dump(2) + "\n";
}

// ---- pairs file -----------------------------------------------------------------------

void write_pairs(std::ostream& out, std::span<const VideoPair> pairs) {
  const std::size_t dim = pairs.empty() ? core::kFeatureDim : pairs.front().pair.features.dim;
  out << "keyframe-pairs " << kPairsFormatVersion << '\n';
  out << "videos " << pairs.size() << " dim " << dim << '\n';
  for (const auto& vp : pairs) {
    const auto& p = vp.pair;
    if (p.features.dim != dim || p.targets.size() != p.features.steps) {
      throw Error(ErrorCode::ShapeMismatch, "pair '" + vp.video_id + "' is inconsistent");
    }
    if (vp.video_id.empty() || vp.video_id.find_first_of(" \t\r\n") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "video id '" + vp.video_id + "' must be non-empty without whitespace");
    }
    out << "video " << vp.video_id << ' ' << p.features.steps << '\n';
    for (std::size_t t = 0; t < p.features.steps; ++t) {
      const auto row = p.features.row(t);
      for (std::size_t d = 0; d < dim; ++d) {
        if (d) out << ' ';
        out << format_double(row[d]);
      }
      out << '\n';
    }
    out << "targets";
    for (double v : p.targets) out << ' ' << format_double(v);
    out << '\n';
  }
}

std::vector<VideoPair> read_pairs(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  const auto next = [&](const char* what) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::FormatVersionMismatch, std::string("pairs file truncated while reading ") + what);
    }
    ++line_no;
    return std::string_view(line);
  };
  const auto tokens = [](std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ' && s[j] != '\r') ++j;
      if (j > i) out.push_back(s.substr(i, j - i));
      i = j;
    }
    return out;
  };
  const auto count = [](std::string_view tok, const std::string& where) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw Error(ErrorCode::InvalidArgument, where + ": bad count '" + std::string(tok) + "'");
    }
    return v;
  };

  auto head = tokens(next("header"));
  if (head.size() != 2 || head[0] != "keyframe-pairs" || head[1] != std::to_string(kPairsFormatVersion)) {
    throw Error(ErrorCode::FormatVersionMismatch, "not a version " + std::to_string(kPairsFormatVersion) + " pairs file");
  }
  auto sizes = tokens(next("sizes"));
  if (sizes.size() != 4 || sizes[0] != "videos" || sizes[2] != "dim") {
    throw Error(ErrorCode::InvalidArgument, "pairs file line 2 must be 'videos <n> dim <d>'");
  }
  const std::size_t n_videos = count(sizes[1], "pairs line 2");
  const std::size_t dim = count(sizes[3], "pairs line 2");

  std::vector<VideoPair> out;
  out.reserve(n_videos);
  for (std::size_t v = 0; v < n_videos; ++v) {
    auto hdr = tokens(next("video header"));
    const std::string where = "pairs line " + std::to_string(line_no);
    if (hdr.size() != 3 || hdr[0] != "video") throw Error(ErrorCode::InvalidArgument, where + ": expected 'video <id> <frames>'");
    VideoPair vp;
    vp.video_id = std::string(hdr[1]);
    const std::size_t steps = count(hdr[2], where);
    vp.pair.features.steps = steps;
    vp.pair.features.dim = dim;
    vp.pair.features.values.reserve(steps * dim);
    for (std::size_t t = 0; t < steps; ++t) {
      auto row = tokens(next("feature row"));
      const std::string w = "pairs line " + std::to_string(line_no);
      if (row.size() != dim) {
        throw Error(ErrorCode::ShapeMismatch, w + ": " + std::to_string(row.size()) + " values, expected " +
                                                  std::to_string(dim));
      }
      for (auto tok : row) vp.pair.features.values.push_back(parse_double_token(tok, w));
    }
    auto tg = tokens(next("targets"));
    const std::string w = "pairs line " + std::to_string(line_no);
    if (tg.empty() || tg[0] != "targets" || tg.size() != steps + 1) {
      throw Error(ErrorCode::ShapeMismatch, w + ": expected 'targets' and " + std::to_string(steps) + " values");
    }
    for (std::size_t t = 1; t < tg.size(); ++t) vp.pair.targets.push_back(parse_double_token(tg[t], w));
    out.push_back(std::move(vp));
  }
  return out;
}

void save_pairs(const std::filesystem::path& path, std::span<const VideoPair> pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_pairs(out, pairs);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<VideoPair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  return read_pairs(in);
}

}  // namespace keyframe::pipeline
