#pragma once
#include <array>
#include <cstdint>
#include <vector>

#include "afog/types.hpp"

namespace afog {

struct LabeledImage {
  Image image;
  DetectionSet ground_truth;
};

// Synthetic detection benchmark: 1-5 bright shapes (circle, square, triangle)
// on a noisy background, 128x128x3, tight ground-truth boxes.
struct ShapesDataset {
  std::vector<LabeledImage> items;
  std::uint64_t seed = 0;
  int num_classes = 3;
};

inline constexpr std::array<const char*, 3> kShapeClassNames = {"circle", "square",
                                                                "triangle"};
inline constexpr int kShapesImageSize = 128;

// Deterministic for a fixed seed. n >= 1.
ShapesDataset generate_shapes_dataset(std::uint64_t seed, int n);

}  // namespace afog
