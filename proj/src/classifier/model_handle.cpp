#include <charconv>

#include "keyframe/classifier.hpp"
#include "keyframe/transforms.hpp"

namespace keyframe::classifier {

ModelHandle::ModelHandle(std::shared_ptr<const Backend> backend) : backend_(std::move(backend)) {
  if (!backend_) throw Error(ErrorCode::InvalidArgument, "null classifier backend");
  if (!backend_->thread_safe()) serial_ = std::make_shared<std::mutex>();
}

ClassifierOutput ModelHandle::classify(const Frame& frame) const {
  const Frame input = transforms::resize_bilinear(frame, backend_->input_width(), backend_->input_height());
  if (serial_) {
    std::lock_guard lock(*serial_);
    return backend_->run(input);
  }
  return backend_->run(input);
}

ModelHandle open_model(const std::string& spec) {
  constexpr std::string_view prefix = "synthetic:";
  if (spec.starts_with(prefix)) {
    std::uint64_t seed = 0;
    const char* first = spec.data() + prefix.size();
    const char* last = spec.data() + spec.size();
    auto [ptr, ec] = std::from_chars(first, last, seed);
    if (ec != std::errc() || ptr != last || first == last) {
      throw Error(ErrorCode::InvalidArgument, "bad synthetic model spec '" + spec + "', expected synthetic:<seed>");
    }
    return synthetic_classifier(seed);
  }
  return load_model(spec);
}

}  // namespace keyframe::classifier
