#include "afog/shapes.hpp"

#include <algorithm>
#include <cmath>

#include "afog/errors.hpp"
#include "afog/rng.hpp"

namespace afog {

namespace {

bool inside_shape(int cls, double px, double py, double cx, double cy, double s) {
  switch (cls) {
    case 0:  // circle
      return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= s * s;
    case 1:  // square
      return std::abs(px - cx) <= s && std::abs(py - cy) <= s;
    default:  // upright isoceles triangle, apex at the top
      if (py < cy - s || py > cy + s) return false;
      return std::abs(px - cx) <= (py - cy + s) * 0.5;
  }
}

}  // namespace

ShapesDataset generate_shapes_dataset(std::uint64_t seed, int n) {
  if (n < 1) throw ValidationError("dataset size must be >= 1");
  const int dim = kShapesImageSize;

  ShapesDataset ds;
  ds.seed = seed;
  ds.items.reserve(n);
  Rng rng(seed);

  for (int i = 0; i < n; ++i) {
    LabeledImage li;
    li.image = Image(dim, dim, 3);
    li.ground_truth.num_classes = 3;

    double base[3];
    for (double& b : base) b = rng.uniform(0.08, 0.30);
    for (int y = 0; y < dim; ++y)
      for (int x = 0; x < dim; ++x)
        for (int c = 0; c < 3; ++c)
          li.image.at(y, x, c) = std::clamp(base[c] + rng.uniform(-0.06, 0.06), 0.0, 1.0);

    const int want = rng.uniform_int(1, 5);
    for (int obj = 0; obj < want; ++obj) {
      int cls = 0;
      double cx = 0.0, cy = 0.0, s = 0.0;
      Box box;
      bool placed = false;
      for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
        cls = rng.uniform_int(0, 2);
        s = rng.uniform(10.0, 26.0);
        cx = rng.uniform(s + 3.0, dim - s - 3.0);
        cy = rng.uniform(s + 3.0, dim - s - 3.0);
        box = Box{cx - s, cy - s, cx + s, cy + s};
        placed = true;
        for (const Detection& d : li.ground_truth.items)
          if (iou(box, d.box) >= 0.25) placed = false;
      }
      if (!placed) continue;

      double color[3];
      for (double& c : color) c = rng.uniform(0.45, 1.0);
      const int x_lo = static_cast<int>(std::floor(box.x1));
      const int x_hi = static_cast<int>(std::ceil(box.x2));
      const int y_lo = static_cast<int>(std::floor(box.y1));
      const int y_hi = static_cast<int>(std::ceil(box.y2));
      for (int y = std::max(0, y_lo); y <= std::min(dim - 1, y_hi); ++y)
        for (int x = std::max(0, x_lo); x <= std::min(dim - 1, x_hi); ++x)
          if (inside_shape(cls, x + 0.5, y + 0.5, cx, cy, s))
            for (int c = 0; c < 3; ++c) li.image.at(y, x, c) = color[c];

      li.ground_truth.items.push_back(Detection{box, cls, 1.0});
    }
    ds.items.push_back(std::move(li));
  }
  return ds;
}

}  // namespace afog
