#include "keyframe/transforms.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "keyframe/simd/kernels.hpp"

namespace keyframe::transforms {
namespace {

using json = nlohmann::json;

// Forward transform about the frame center: offset' = linear * offset + shift.
struct CenteredAffine {
  double a = 1, b = 0, c = 0, d = 1;  // [[a b] [c d]]
  double tx = 0, ty = 0;              // pixels
};

CenteredAffine compose(const CenteredAffine& outer, const CenteredAffine& inner) {
  CenteredAffine r;
  r.a = outer.a * inner.a + outer.b * inner.c;
  r.b = outer.a * inner.b + outer.b * inner.d;
  r.c = outer.c * inner.a + outer.d * inner.c;
  r.d = outer.c * inner.b + outer.d * inner.d;
  r.tx = outer.a * inner.tx + outer.b * inner.ty + outer.tx;
  r.ty = outer.c * inner.tx + outer.d * inner.ty + outer.ty;
  return r;
}

CenteredAffine rotation(double angle_deg) {
  const double t = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t);
  // y axis points down, so a counter-clockwise turn on screen is
  // (dx, dy) -> (cos*dx + sin*dy, -sin*dx + cos*dy).
  return {cs, sn, -sn, cs, 0, 0};
}

// Inverse of a centered forward transform, expressed as the kernel's
// destination -> source map in absolute pixel coordinates.
simd::AffineMap inverse_map(const CenteredAffine& f, std::size_t width, std::size_t height) {
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double det = f.a * f.d - f.b * f.c;
  const double ia = f.d / det, ib = -f.b / det, ic = -f.c / det, id = f.a / det;
  // src = c + inv * (dst - c - t)
  const double ox = -cx - f.tx;
  const double oy = -cy - f.ty;
  simd::AffineMap m;
  m.xx = static_cast<float>(ia);
  m.xy = static_cast<float>(ib);
  m.x0 = static_cast<float>(cx + ia * ox + ib * oy);
  m.yx = static_cast<float>(ic);
  m.yy = static_cast<float>(id);
  m.y0 = static_cast<float>(cy + ic * ox + id * oy);
  return m;
}

Frame warp(const Frame& frame, const CenteredAffine& forward) {
  const auto map = inverse_map(forward, frame.width(), frame.height());
  std::vector<float> out(frame.width() * frame.height());
  simd::active().warp_bilinear(frame.pixels().data(), frame.width(), frame.height(), out.data(), frame.width(),
                               frame.height(), map, simd::Border::Zero);
  return Frame(frame.width(), frame.height(), std::move(out));
}

Frame flip(const Frame& frame, bool horizontal) {
  const std::size_t w = frame.width(), h = frame.height();
  std::vector<float> out(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = horizontal ? w - 1 - x : x;
      const std::size_t sy = horizontal ? y : h - 1 - y;
      out[y * w + x] = frame.at(sx, sy);
    }
  }
  return Frame(w, h, std::move(out));
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

json spec_to_json(const AffineSpec& s) {
  switch (s.kind()) {
    case AffineSpec::Kind::Identity: return {{"kind", "identity"}};
    case AffineSpec::Kind::HorizontalFlip: return {{"kind", "hflip"}};
    case AffineSpec::Kind::VerticalFlip: return {{"kind", "vflip"}};
    case AffineSpec::Kind::Rotate: return {{"kind", "rotate"}, {"angle_deg", s.angle_deg()}};
    case AffineSpec::Kind::Translate: return {{"kind", "translate"}, {"dx", s.dx()}, {"dy", s.dy()}};
    case AffineSpec::Kind::Scale: return {{"kind", "scale"}, {"factor", s.factor()}};
  }
  return {};
}

AffineSpec spec_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return AffineSpec::identity();
  if (kind == "hflip") return AffineSpec::horizontal_flip();
  if (kind == "vflip") return AffineSpec::vertical_flip();
  if (kind == "rotate") return AffineSpec::rotate(j.at("angle_deg").get<double>());
  if (kind == "translate") return AffineSpec::translate(j.at("dx").get<double>(), j.at("dy").get<double>());
  if (kind == "scale") return AffineSpec::scale(j.at("factor").get<double>());
  throw Error(ErrorCode::InvalidArgument, "unknown transform kind '" + kind + "'");
}

}  // namespace

AffineSpec AffineSpec::rotate(double angle_deg) {
  if (!(angle_deg >= -180.0 && angle_deg <= 180.0)) {
    throw Error(ErrorCode::InvalidArgument, "rotation angle must lie in [-180, 180] degrees");
  }
  return AffineSpec(Kind::Rotate, angle_deg, 0);
}

AffineSpec AffineSpec::translate(double dx, double dy) {
  if (!(std::abs(dx) <= 0.5 && std::abs(dy) <= 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "translation fractions must satisfy |dx|, |dy| <= 0.5");
  }
  return AffineSpec(Kind::Translate, dx, dy);
}

AffineSpec AffineSpec::scale(double factor) {
  if (!(factor >= 1.0 && factor <= 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "scale factor must lie in [1, 2]");
  }
  return AffineSpec(Kind::Scale, factor, 0);
}

std::string AffineSpec::describe() const {
  switch (kind_) {
    case Kind::Identity: return "identity";
    case Kind::HorizontalFlip: return "hflip";
    case Kind::VerticalFlip: return "vflip";
    case Kind::Rotate: return "rotate(" + format_number(a_) + ")";
    case Kind::Translate: return "translate(" + format_number(a_) + "," + format_number(b_) + ")";
    case Kind::Scale: return "scale(" + format_number(a_) + ")";
  }
  return "?";
}

TtaCatalogue::TtaCatalogue(std::vector<AffineSpec> specs) : specs_(std::move(specs)) {
  if (specs_.empty() || specs_.front().kind() != AffineSpec::Kind::Identity) {
    throw Error(ErrorCode::InvalidArgument, "a TTA catalogue must start with the identity transform");
  }
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    for (std::size_t j = i + 1; j < specs_.size(); ++j) {
      if (specs_[i] == specs_[j]) {
        throw Error(ErrorCode::InvalidArgument, "duplicate TTA transform " + specs_[i].describe());
      }
    }
  }
}

TtaCatalogue default_tta_catalogue() {
  return TtaCatalogue({
      AffineSpec::identity(),
      AffineSpec::horizontal_flip(),
      AffineSpec::rotate(15),
      AffineSpec::rotate(-15),
      AffineSpec::rotate(10),
      AffineSpec::rotate(-10),
      AffineSpec::rotate(5),
      AffineSpec::rotate(-5),
      AffineSpec::translate(0.10, 0.10),
      AffineSpec::translate(-0.10, -0.10),
      AffineSpec::scale(1.05),
      AffineSpec::scale(1.10),
      AffineSpec::scale(1.15),
      AffineSpec::scale(1.20),
  });
}

TtaCatalogue parse_catalogue(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnsupportedFormat, std::string("catalogue is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != 1) {
      throw Error(ErrorCode::FormatVersionMismatch, "catalogue format_version must be 1");
    }
    std::vector<AffineSpec> specs;
    for (const auto& item : doc.at("transforms")) specs.push_back(spec_from_json(item));
    return TtaCatalogue(std::move(specs));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnsupportedFormat, std::string("malformed catalogue: ") + e.what());
  }
}

TtaCatalogue load_catalogue(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open catalogue " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_catalogue(buf.str());
}

std::string serialize_catalogue(const TtaCatalogue& catalogue) {
  json doc;
  doc["format_version"] = 1;
  doc["transforms"] = json::array();
  for (const auto& s : catalogue.specs()) doc["transforms"].push_back(spec_to_json(s));
  return doc.dump(2) + "\n";
}

Frame apply_affine(const Frame& frame, const AffineSpec& spec) {
  switch (spec.kind()) {
    case AffineSpec::Kind::Identity: return frame;
    case AffineSpec::Kind::HorizontalFlip: return flip(frame, true);
    case AffineSpec::Kind::VerticalFlip: return flip(frame, false);
    case AffineSpec::Kind::Rotate: return warp(frame, rotation(spec.angle_deg()));
    case AffineSpec::Kind::Translate: {
      CenteredAffine t;
      t.tx = spec.dx() * static_cast<double>(frame.width());
      t.ty = spec.dy() * static_cast<double>(frame.height());
      return warp(frame, t);
    }
    case AffineSpec::Kind::Scale: {
      const double f = spec.factor();
      return warp(frame, CenteredAffine{f, 0, 0, f, 0, 0});
    }
  }
  return frame;
}

Frame random_train_augment(const Frame& frame, std::uint64_t seed, const TrainAugmentRanges& ranges) {
  core::Rng rng(seed);
  const double s = rng.uniform(ranges.scale_min, ranges.scale_max);
  const bool hflip = rng.bernoulli(ranges.flip_probability);
  const bool vflip = rng.bernoulli(ranges.flip_probability);
  const double tx = rng.uniform(-ranges.max_shift, ranges.max_shift);
  const double ty = rng.uniform(-ranges.max_shift, ranges.max_shift);
  const double angle = rng.uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg);

  // flip -> scale -> rotate -> translate, all about the center
  CenteredAffine t{hflip ? -1.0 : 1.0, 0, 0, vflip ? -1.0 : 1.0, 0, 0};
  t = compose(CenteredAffine{s, 0, 0, s, 0, 0}, t);
  t = compose(rotation(angle), t);
  t.tx += tx * static_cast<double>(frame.width());
  t.ty += ty * static_cast<double>(frame.height());
  return warp(frame, t);
}

Frame resize_bilinear(const Frame& frame, std::size_t width, std::size_t height) {
  if (width == frame.width() && height == frame.height()) return frame;
  if (width == 0 || height == 0) throw Error(ErrorCode::InvalidArgument, "resize target must be at least 1x1");
  const double sx = static_cast<double>(frame.width()) / static_cast<double>(width);
  const double sy = static_cast<double>(frame.height()) / static_cast<double>(height);
  simd::AffineMap m;
  m.xx = static_cast<float>(sx);
  m.x0 = static_cast<float>(0.5 * sx - 0.5);
  m.yy = static_cast<float>(sy);
  m.y0 = static_cast<float>(0.5 * sy - 0.5);
  std::vector<float> out(width * height);
  simd::active().warp_bilinear(frame.pixels().data(), frame.width(), frame.height(), out.data(), width, height, m,
                               simd::Border::Replicate);
  return Frame(width, height, std::move(out));
}

}  // namespace keyframe::transforms
