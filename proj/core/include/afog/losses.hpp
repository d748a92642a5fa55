#pragma once
#include <vector>

#include "afog/victim.hpp"

namespace afog {

// Mode-shaped attack loss. In every mode `total` is the raw detection loss of
// the adversarial image against the mode's pseudo-targets; the bbox/cls
// components carry the mode sign, so total == bbox + cls in generic mode and
// total == -(bbox + cls) in vanish/fabricate modes.
struct LossValues {
  double total = 0.0;
  double bbox = 0.0;
  double cls = 0.0;
  std::vector<double> per_object;
};

// Generic attack objective against the benign detections kept above the
// confidence threshold. Throws DegenerateTargetError on an empty target set;
// the engine decides the fallback.
LossValues afog_loss(const VictimAdapter& adapter, const Image& x_adv,
                     const DetectionSet& targets);

// Vanishing objective: loss against the empty target set, every query pushed
// toward no-object. Lower means fewer surviving detections.
LossValues vanishing_loss(const VictimAdapter& adapter, const Image& x_adv);

// Fabrication objective against the full raw prediction set with scores forced
// to 1.0. Throws DegenerateTargetError when o_f is empty.
LossValues fabrication_loss(const VictimAdapter& adapter, const Image& x_adv,
                            const DetectionSet& o_f);

LossValues mode_loss(const VictimAdapter& adapter, const Image& x_adv, AttackMode mode,
                     const DetectionSet& targets);

// Max-absolute normalization: g / max|g|, the zero array stays zero. Output
// values lie in [-1, 1].
std::vector<double> normalize_gradient(const std::vector<double>& g);

// Elementwise sign in {-1, 0, +1}.
std::vector<double> sign_gradient(const std::vector<double>& g);

}  // namespace afog
