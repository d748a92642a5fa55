#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "afog/errors.hpp"

namespace afog {

// Dense H x W x C intensity array, row-major, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Throws ValidationError naming the violated invariant; returns its argument otherwise.
const Image& validate_image(const Image& img);

// Corner-form box in continuous pixel coordinates, x1 < x2 and y1 < y2.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

bool box_valid(const Box& b);

// Intersection over union of two valid boxes; symmetric, in [0, 1].
double iou(const Box& a, const Box& b);

struct Detection {
  Box box;
  int label = 0;      // class id in [0, K-1]
  double score = 0.0; // confidence in [0, 1]
};

struct DetectionSet {
  std::vector<Detection> items;
  int num_classes = 0;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

void validate_detection_set(const DetectionSet& ds);

// Learned per-pixel multiplier on the perturbation, one spatial channel
// broadcast across colors. All-ones at init, clamped to [0, a_max].
struct AttentionMap {
  int height = 0;
  int width = 0;
  std::vector<double> weights;

  AttentionMap() = default;
  AttentionMap(int h, int w, double fill = 1.0)
      : height(h), width(w), weights(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return weights[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * width + x]; }
};

// Raw learnable perturbation, image-shaped. The epsilon budget is enforced by
// projection at composition time, not by the map itself.
struct PerturbationMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  PerturbationMap() = default;
  PerturbationMap(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        values(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

enum class AttackMode { Generic, Vanish, Fabricate };

std::string to_string(AttackMode mode);
// Accepts the CLI spellings "afog"/"vanish"/"fabricate" plus "generic".
AttackMode attack_mode_from_string(const std::string& name);

struct AttackConfig {
  double epsilon = 0.031;        // L-inf budget on [0,1] intensities
  double alpha_p = 0.031 / 4.0;  // perturbation step size
  double alpha_a = 0.1;          // attention step size
  int iterations = 10;
  AttackMode mode = AttackMode::Generic;
  double conf_threshold = 0.5;
  double gamma = 0.5;            // IoU success threshold
  std::uint64_t seed = 0;
  bool attention_enabled = true;
  double a_max = 2.0;

  void validate() const;  // throws ValidationError
};

struct MetricBundle {
  double l2 = 0.0;               // root-mean-square difference
  double l0 = 0.0;               // fraction of pixel sites changed after 8-bit quantization
  double linf = 0.0;             // max absolute difference
  double ssim = 1.0;             // mean local SSIM
  double mean_distortion = 0.0;  // mean absolute difference
  double wall_time_s = 0.0;
};

// One trace entry per attack iteration, reported in the benign-minus-adversarial
// difference form so a successful attack drives total downward in every mode.
struct LossPoint {
  double total = 0.0;
  double bbox = 0.0;
  double cls = 0.0;
};

struct AttackResult {
  Image adversarial_image;
  AttentionMap attention;
  PerturbationMap perturbation;
  std::vector<LossPoint> loss_trace;  // length == iterations
  DetectionSet benign_detections;
  DetectionSet adversarial_detections;
  MetricBundle metrics;
  std::vector<bool> per_object_success;  // one flag per benign detection
  LossPoint benign_baseline;             // detection loss of the clean image vs targets
  bool degenerate_fallback = false;
};

}  // namespace afog
