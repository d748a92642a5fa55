#pragma once
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "afog/types.hpp"

namespace afog {

// Targets a detection loss is evaluated against: the benign predictions in
// generic mode, the empty set in vanish mode, the score-1.0 raw set in
// fabricate mode.
struct LossSpec {
  AttackMode mode = AttackMode::Generic;
  DetectionSet targets;
};

// Raw detection-loss components of an image against a target set. total is
// always bbox + cls; mode-dependent sign shaping happens in the loss layer.
struct DetectionLoss {
  double total = 0.0;
  double bbox = 0.0;
  double cls = 0.0;
  std::vector<double> per_target;  // unnormalized matched-pair contribution per target
};

struct LossAndGradient {
  DetectionLoss loss;
  Image gradient;  // exact derivative of loss.total w.r.t. the input image
};

struct SpatialConstraints {
  int min_height = 1, max_height = 1 << 14;
  int min_width = 1, max_width = 1 << 14;
};

// Contract every victim model plugs in through. detect() and
// loss_and_gradient() must be deterministic for fixed inputs and model state;
// parameters stay frozen across calls. A single instance may serialize its
// calls internally; distinct instances are independent.
class VictimAdapter {
 public:
  virtual ~VictimAdapter() = default;

  virtual std::string id() const = 0;
  virtual int num_classes() const = 0;
  virtual SpatialConstraints input_constraints() const = 0;

  // All returned scores are >= conf_threshold.
  virtual DetectionSet detect(const Image& img, double conf_threshold) const = 0;

  virtual LossAndGradient loss_and_gradient(const Image& img, const LossSpec& spec) const = 0;

  // Detection loss only; default implementation discards the gradient.
  virtual DetectionLoss loss(const Image& img, const LossSpec& spec) const {
    return loss_and_gradient(img, spec).loss;
  }

  // Checksum over all parameters; invariant across loss_and_gradient calls.
  virtual std::uint64_t parameter_checksum() const = 0;

  virtual std::unique_ptr<VictimAdapter> clone() const = 0;
};

// Optimal one-to-one pairing between two detection sets, minimizing
// class-mismatch plus (1 - IoU) box distance; unmatched items are omitted.
// Pairs are (pred_index, target_index), ordered by pred index.
std::vector<std::pair<int, int>> match_predictions(const DetectionSet& preds,
                                                   const DetectionSet& targets);

}  // namespace afog
