#include "afog/types.hpp"

#include <algorithm>
#include <cmath>

namespace afog {

const Image& validate_image(const Image& img) {
  if (img.height < 1 || img.width < 1)
    throw ValidationError("image shape invalid: H and W must be >= 1");
  if (img.channels != 1 && img.channels != 3)
    throw ValidationError("image shape invalid: C must be 1 or 3");
  const std::size_t expect =
      static_cast<std::size_t>(img.height) * img.width * img.channels;
  if (img.pixels.size() != expect)
    throw ValidationError("image buffer size does not match H*W*C");
  for (double v : img.pixels) {
    if (!std::isfinite(v)) throw ValidationError("image contains non-finite value");
    if (v < 0.0 || v > 1.0) throw ValidationError("image value out of [0,1]");
  }
  return img;
}

bool box_valid(const Box& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2) && b.x1 < b.x2 && b.y1 < b.y2;
}

double iou(const Box& a, const Box& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

void validate_detection_set(const DetectionSet& ds) {
  for (const Detection& d : ds.items) {
    if (!box_valid(d.box)) throw ValidationError("detection box invalid");
    if (d.label < 0 || d.label >= ds.num_classes)
      throw ValidationError("detection label out of [0, K-1]");
    if (!(d.score >= 0.0 && d.score <= 1.0))
      throw ValidationError("detection score out of [0,1]");
  }
}

std::string to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::Generic: return "afog";
    case AttackMode::Vanish: return "vanish";
    case AttackMode::Fabricate: return "fabricate";
  }
  return "afog";
}

AttackMode attack_mode_from_string(const std::string& name) {
  if (name == "afog" || name == "generic") return AttackMode::Generic;
  if (name == "vanish") return AttackMode::Vanish;
  if (name == "fabricate") return AttackMode::Fabricate;
  throw ValidationError("unknown attack mode: " + name);
}

void AttackConfig::validate() const {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (!(alpha_p > 0.0)) throw ValidationError("alpha_p must be > 0");
  if (!(alpha_a >= 0.0)) throw ValidationError("alpha_a must be >= 0");
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0))
    throw ValidationError("conf_threshold must be in [0,1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("gamma must be in (0,1)");
  if (!(a_max > 0.0)) throw ValidationError("a_max must be > 0");
}

}  // namespace afog
