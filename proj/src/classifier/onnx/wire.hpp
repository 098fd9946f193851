#pragma once

// Minimal protobuf wire-format reader: enough to walk an ONNX ModelProto
// without generated code. Unknown fields are skipped.

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "keyframe/core.hpp"

namespace keyframe::classifier::onnx {

enum class WireType : std::uint8_t { Varint = 0, Fixed64 = 1, LengthDelimited = 2, Fixed32 = 5 };

class WireReader {
 public:
  explicit WireReader(std::span<const std::uint8_t> bytes) : data_(bytes) {}

  bool done() const noexcept { return pos_ >= data_.size(); }

  // Reads the next tag; returns false at end of message.
  bool next(std::uint32_t& field, WireType& type) {
    if (done()) return false;
    const std::uint64_t key = varint();
    field = static_cast<std::uint32_t>(key >> 3);
    const auto wt = static_cast<std::uint8_t>(key & 7);
    if (wt != 0 && wt != 1 && wt != 2 && wt != 5) fail("unsupported wire type " + std::to_string(wt));
    type = static_cast<WireType>(wt);
    return true;
  }

  std::uint64_t varint() {
    std::uint64_t result = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (done()) fail("truncated varint");
      const std::uint8_t b = data_[pos_++];
      result |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if ((b & 0x80) == 0) return result;
    }
    fail("varint too long");
  }

  std::int64_t int64() { return static_cast<std::int64_t>(varint()); }

  float fixed32_float() {
    std::uint32_t bits = fixed32();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::uint32_t fixed32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t fixed64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::span<const std::uint8_t> bytes() {
    const std::uint64_t len = varint();
    need(len);
    auto out = data_.subspan(pos_, static_cast<std::size_t>(len));
    pos_ += static_cast<std::size_t>(len);
    return out;
  }

  std::string string() {
    auto b = bytes();
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
  }

  void skip(WireType type) {
    switch (type) {
      case WireType::Varint: varint(); break;
      case WireType::Fixed64: need(8); pos_ += 8; break;
      case WireType::LengthDelimited: bytes(); break;
      case WireType::Fixed32: need(4); pos_ += 4; break;
    }
  }

  // Repeated scalar fields may arrive packed (one length-delimited run) or
  // one element per tag; both forms append to `out`.
  void repeated_int64(WireType type, std::vector<std::int64_t>& out) {
    if (type == WireType::LengthDelimited) {
      WireReader inner(bytes());
      while (!inner.done()) out.push_back(inner.int64());
    } else {
      out.push_back(int64());
    }
  }

  void repeated_float(WireType type, std::vector<float>& out) {
    if (type == WireType::LengthDelimited) {
      WireReader inner(bytes());
      while (!inner.done()) out.push_back(inner.fixed32_float());
    } else {
      out.push_back(fixed32_float());
    }
  }

  void repeated_double(WireType type, std::vector<double>& out) {
    auto one = [](WireReader& r) {
      const std::uint64_t bits = r.fixed64();
      double v;
      std::memcpy(&v, &bits, sizeof v);
      return v;
    };
    if (type == WireType::LengthDelimited) {
      WireReader inner(bytes());
      while (!inner.done()) out.push_back(one(inner));
    } else {
      out.push_back(one(*this));
    }
  }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) fail("truncated message");
  }

  [[noreturn]] static void fail(const std::string& what) {
    throw Error(ErrorCode::UnsupportedFormat, "protobuf decode: " + what);
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace keyframe::classifier::onnx
