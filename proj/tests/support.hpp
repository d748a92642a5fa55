#pragma once
#include <cstdlib>
#include <filesystem>
#include <string>

#include "afog/rng.hpp"
#include "afog/toy_detector.hpp"
#include "afog/types.hpp"

namespace afog::test {

// Fixture tree produced by make_fixtures (ctest fixture setup):
//   <dir>/train/{images,annotations.json}
//   <dir>/test/{images,annotations.json}
//   <dir>/toy.bin
//   <dir>/benign_map50.txt
inline std::string fixture_dir() {
  if (const char* env = std::getenv("AFOG_FIXTURE_DIR")) return env;
  return "fixtures";
}

inline std::string fixture_path(const std::string& rel) {
  return (std::filesystem::path(fixture_dir()) / rel).string();
}

// Reference fixture recipe; make_fixtures and the docs are the two consumers.
inline constexpr std::uint64_t kTrainSeed = 7;
inline constexpr int kTrainImages = 800;
inline constexpr std::uint64_t kTestSeed = 1007;
inline constexpr int kTestImages = 200;

inline TrainOptions reference_train_options() {
  TrainOptions opts;
  opts.epochs = 60;
  opts.batch_size = 8;
  opts.learning_rate = 3e-3;
  opts.seed = 1;
  return opts;
}

inline Image random_image(Rng& rng, int h, int w, int c) {
  Image img(h, w, c);
  for (double& v : img.pixels) v = rng.uniform01();
  return img;
}

inline Box random_box(Rng& rng, double extent = 100.0) {
  const double x1 = rng.uniform(0.0, extent), y1 = rng.uniform(0.0, extent);
  return Box{x1, y1, x1 + rng.uniform(1.0, extent / 2), y1 + rng.uniform(1.0, extent / 2)};
}

}  // namespace afog::test
