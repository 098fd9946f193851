// Writes the recorded output of the synthetic classifier (seed 7) on an
// all-zero 64x64 frame. Usage: make_synthetic_golden <out.json>

#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "keyframe/classifier.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_synthetic_golden <out.json>\n";
    return 1;
  }
  using namespace keyframe;
  const auto out = classifier::synthetic_classifier(7).classify(core::Frame(64, 64));
  nlohmann::ordered_json j;
  j["seed"] = 7;
  j["width"] = 64;
  j["height"] = 64;
  j["probs"] = out.probs.values();
  j["features"] = out.features.values();
  std::ofstream(argv[1]) << j.dump(1) << "\n";
  return 0;
}
