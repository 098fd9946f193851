#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "keyframe/pipeline.hpp"

namespace keyframe::pipeline {

Frame decode_image(const std::filesystem::path& path) {
  cv::Mat img;
  try {
    img = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::UnreadableFile, path.string() + ": " + e.what());
  }
  if (img.empty()) throw Error(ErrorCode::UnreadableFile, path.string() + " is not a decodable image");

  cv::Mat gray;
  switch (img.channels()) {
    case 1: gray = img; break;
    case 3: cv::cvtColor(img, gray, cv::COLOR_BGR2GRAY); break;
    case 4: cv::cvtColor(img, gray, cv::COLOR_BGRA2GRAY); break;
    default:
      throw Error(ErrorCode::UnreadableFile, path.string() + ": unsupported channel count " +
                                                 std::to_string(img.channels()));
  }
  double scale = 1.0;
  switch (gray.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F: break;
    default: throw Error(ErrorCode::UnreadableFile, path.string() + ": unsupported pixel depth");
  }
  cv::Mat f;
  gray.convertTo(f, CV_32F, scale);
  std::vector<float> pixels(static_cast<std::size_t>(f.rows) * static_cast<std::size_t>(f.cols));
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    for (int x = 0; x < f.cols; ++x) {
      const float v = row[x];
      pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(f.cols) + static_cast<std::size_t>(x)] =
          std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    }
  }
  return Frame(static_cast<std::size_t>(f.cols), static_cast<std::size_t>(f.rows), std::move(pixels));
}

std::vector<Frame> ingest_frames(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::NoFrames, dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && !name.empty() && name.front() != '.') files.push_back(entry.path());
  }
  if (files.empty()) throw Error(ErrorCode::NoFrames, "no image files in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    Frame frame = decode_image(f);
    if (!frames.empty() &&
        (frame.width() != frames.front().width() || frame.height() != frames.front().height())) {
      throw Error(ErrorCode::InconsistentDimensions,
                  f.filename().string() + " is " + std::to_string(frame.width()) + "x" +
                      std::to_string(frame.height()) + ", expected " + std::to_string(frames.front().width()) + "x" +
                      std::to_string(frames.front().height()) + " like " + files.front().filename().string());
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

void save_frames(const std::filesystem::path& dir, std::span<const Frame> frames) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& fr = frames[i];
    cv::Mat img(static_cast<int>(fr.height()), static_cast<int>(fr.width()), CV_16U);
    for (std::size_t y = 0; y < fr.height(); ++y) {
      auto* row = img.ptr<std::uint16_t>(static_cast<int>(y));
      for (std::size_t x = 0; x < fr.width(); ++x) {
        row[x] = static_cast<std::uint16_t>(std::lround(fr.at(x, y) * 65535.0f));
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.png", i);
    const auto path = dir / name;
    if (!cv::imwrite(path.string(), img)) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
}

std::vector<Frame> synthetic_video(std::size_t frames, std::size_t width, std::size_t height, std::uint64_t seed) {
  if (frames == 0 || width == 0 || height == 0) throw Error(ErrorCode::InvalidArgument, "empty synthetic video");
  core::Rng rng(core::mix_seed(seed, 0x76696465));
  // Slow random walk of the structure's centre, size and brightness.
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  double cx = 0.5 * w, cy = 0.5 * h, rx = 0.25 * w, ry = 0.18 * h, gain = 0.6, angle = 0.0;
  std::vector<Frame> out;
  out.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    cx = std::clamp(cx + 0.01 * w * rng.normal(), 0.2 * w, 0.8 * w);
    cy = std::clamp(cy + 0.01 * h * rng.normal(), 0.2 * h, 0.8 * h);
    rx = std::clamp(rx * (1.0 + 0.02 * rng.normal()), 0.1 * w, 0.4 * w);
    ry = std::clamp(ry * (1.0 + 0.02 * rng.normal()), 0.08 * h, 0.3 * h);
    gain = std::clamp(gain + 0.04 * rng.normal(), 0.0, 1.0);
    angle += 0.03 * rng.normal();
    const double ca = std::cos(angle), sa = std::sin(angle);
    std::vector<float> px(width * height);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        const double u = (ca * dx + sa * dy) / rx, v = (-sa * dx + ca * dy) / ry;
        const double r2 = u * u + v * v;
        // bright rim with a darker interior, roughly like a skull cross-section
        const double rim = std::exp(-8.0 * (std::sqrt(r2) - 1.0) * (std::sqrt(r2) - 1.0));
        const double inner = r2 < 1.0 ? 0.25 * (1.0 - r2) : 0.0;
        const double speckle = 0.08 * rng.uniform01();
        px[y * width + x] = static_cast<float>(std::clamp(gain * (rim + inner) + speckle, 0.0, 1.0));
      }
    }
    out.emplace_back(width, height, std::move(px));
  }
  return out;
}

}  // namespace keyframe::pipeline
