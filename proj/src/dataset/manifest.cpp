#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "common/csv.hpp"
#include "keyframe/dataset.hpp"

namespace keyframe::dataset {
namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, where + ": '" + s + "' is not a number");
  }
  return v;
}

std::uint64_t parse_count(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, where + ": '" + s + "' is not a non-negative integer");
  }
  return v;
}

void expect_header(const csv::Row& header, std::initializer_list<std::string_view> required, std::size_t optional,
                   std::string_view what) {
  std::size_t i = 0;
  bool ok = header.size() >= required.size() && header.size() <= required.size() + optional;
  for (auto name : required) {
    if (!ok) break;
    ok = trim(header[i++]) == name;
  }
  if (!ok) {
    std::string expected;
    for (auto name : required) expected += (expected.empty() ? "" : ",") + std::string(name);
    throw Error(ErrorCode::InvalidArgument, std::string(what) + ": header must be '" + expected + "'");
  }
}

}  // namespace

std::string_view to_string(Split s) noexcept { return s == Split::Train ? "train" : "val"; }

DatasetManifest::DatasetManifest(std::vector<ImageEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string> seen;
  seen.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.patient_id.empty()) throw Error(ErrorCode::InvalidArgument, "entry " + std::to_string(i) + " has no patient_id");
    if (e.image_path.empty()) throw Error(ErrorCode::InvalidArgument, "entry " + std::to_string(i) + " has no image_path");
    if (!seen.insert(e.image_path).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate image_path '" + e.image_path + "'");
    }
  }
}

DatasetManifest parse_manifest(const std::string& text) {
  const csv::Table t = csv::parse(text, "manifest");
  if (t.header.empty() || (t.header.size() == 1 && t.header.front().empty())) return {};
  expect_header(t.header, {"patient_id", "image_path", "label"}, 1, "manifest");
  const bool has_split = t.header.size() == 4;
  if (has_split && trim(t.header[3]) != "split") {
    throw Error(ErrorCode::InvalidArgument, "manifest: fourth column must be 'split'");
  }
  std::vector<ImageEntry> entries;
  entries.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = "manifest line " + std::to_string(t.line_numbers[r]);
    if (row.size() != t.header.size()) {
      throw Error(ErrorCode::InvalidArgument, where + ": expected " + std::to_string(t.header.size()) + " fields");
    }
    ImageEntry e;
    e.patient_id = trim(row[0]);
    e.image_path = row[1];
    try {
      e.label = core::parse_label(trim(row[2]));
    } catch (const Error& err) {
      throw Error(ErrorCode::InvalidArgument, where + ": " + err.what());
    }
    if (has_split) {
      const std::string s = trim(row[3]);
      if (s == "train") {
        e.split = Split::Train;
      } else if (s == "val") {
        e.split = Split::Val;
      } else if (!s.empty()) {
        throw Error(ErrorCode::InvalidArgument, where + ": split must be 'train', 'val' or empty");
      }
    }
    entries.push_back(std::move(e));
  }
  return DatasetManifest(std::move(entries));
}

DatasetManifest load_manifest(const std::filesystem::path& path) { return parse_manifest(read_text(path)); }

std::string serialize_manifest(const DatasetManifest& m) {
  bool has_split = false;
  for (const auto& e : m.entries()) has_split = has_split || e.split.has_value();
  std::string out = has_split ? "patient_id,image_path,label,split\n" : "patient_id,image_path,label\n";
  for (const auto& e : m.entries()) {
    out += csv::quote(e.patient_id) + ',' + csv::quote(e.image_path) + ',' + std::string(core::label_name(e.label));
    if (has_split) out += ',' + (e.split ? std::string(to_string(*e.split)) : std::string());
    out += '\n';
  }
  return out;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << serialize_manifest(m);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

void VideoEntry::validate() const {
  if (video_id.empty()) throw Error(ErrorCode::InvalidArgument, "video entry without id");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw Error(ErrorCode::InvalidArgument, "video " + video_id + ": duration must be positive");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) throw Error(ErrorCode::InvalidArgument, "video " + video_id + ": fps must be positive");
  if (std::abs(static_cast<double>(frame_count) - duration_s * fps) > fps) {
    throw Error(ErrorCode::InvalidArgument, "video " + video_id + ": frame_count " + std::to_string(frame_count) +
                                                " inconsistent with duration x fps");
  }
}

std::vector<VideoEntry> parse_video_list(const std::string& text) {
  const csv::Table t = csv::parse(text, "video list");
  expect_header(t.header, {"video_id", "duration_s", "fps", "frame_count"}, 0, "video list");
  std::vector<VideoEntry> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = "video list line " + std::to_string(t.line_numbers[r]);
    if (row.size() != 4) throw Error(ErrorCode::InvalidArgument, where + ": expected 4 fields");
    VideoEntry v{trim(row[0]), parse_double(trim(row[1]), where), parse_double(trim(row[2]), where),
                 parse_count(trim(row[3]), where)};
    v.validate();
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<VideoEntry> load_video_list(const std::filesystem::path& path) {
  return parse_video_list(read_text(path));
}

}  // namespace keyframe::dataset
