#pragma once
#include <vector>

#include "afog/types.hpp"
#include "afog/victim.hpp"

namespace afog {

// Loop state of one attack run. adversarial always equals
// compose_adversarial(anchor, attention, perturbation, epsilon).
struct AttackState {
  int k = 0;
  AttentionMap attention;
  PerturbationMap perturbation;
  Image anchor;
  Image adversarial;
  DetectionSet targets;
  DetectionSet raw_benign;     // detect(x, 0), kept for reporting
  LossPoint benign_reference;  // detection loss of the clean image vs targets
  AttackMode effective_mode = AttackMode::Generic;
  bool degenerate_fallback = false;
  std::vector<LossPoint> trace;
};

// generic: keep detections scoring >= conf_threshold; vanish: empty set;
// fabricate: every raw detection with its score replaced by 1.0.
DetectionSet build_pseudo_ground_truth(const DetectionSet& benign_raw, AttackMode mode,
                                       double conf_threshold);

// Descent gradients of the attack objective w.r.t. the attention and
// perturbation maps, obtained from one adapter input-gradient query chained
// through the composition; the projection mask blocks gradient where the clip
// is active. raw_loss carries the adapter's detection-loss components.
struct AttackGradients {
  std::vector<double> d_attention;     // H x W
  std::vector<double> d_perturbation;  // H x W x C
  LossPoint raw_loss;
};

AttackGradients compute_attack_gradients(const AttackState& state, const VictimAdapter& adapter,
                                         const AttackConfig& config);

// Elementwise clip of x + A (.) P into [x - eps, x + eps] intersected with
// [0, 1]; the attention channel broadcasts across colors.
Image compose_adversarial(const Image& x, const AttentionMap& attention,
                          const PerturbationMap& perturbation, double epsilon);

// All-ones attention, perturbation i.i.d. uniform on (-eps, eps) from the
// seeded generator, pseudo-targets built per mode. When generic mode finds no
// benign detection above the threshold the image falls back to
// fabricate-style targets and the state is flagged.
AttackState init_state(const Image& x, const VictimAdapter& adapter, const AttackConfig& config);

// One joint update: a single loss/gradient query at the current adversarial
// image, chain rule through the composition onto A and P, normalized step on
// A (clamped to [0, a_max]), sign step on P, recomposition, trace append.
// With attention disabled A is never touched.
void step(AttackState& state, const VictimAdapter& adapter, const AttackConfig& config);

// Full run: exactly config.iterations steps plus the final recomposition,
// detections and metrics populated, per-object success evaluated at gamma.
AttackResult run_attack(const Image& x, const VictimAdapter& adapter, const AttackConfig& config);

}  // namespace afog
