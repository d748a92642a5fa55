#include "afog/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "afog/errors.hpp"
#include "afog/losses.hpp"
#include "afog/metrics.hpp"
#include "afog/rng.hpp"

namespace afog {

DetectionSet build_pseudo_ground_truth(const DetectionSet& benign_raw, AttackMode mode,
                                       double conf_threshold) {
  DetectionSet out;
  out.num_classes = benign_raw.num_classes;
  switch (mode) {
    case AttackMode::Generic:
      for (const Detection& d : benign_raw.items)
        if (d.score >= conf_threshold) out.items.push_back(d);
      break;
    case AttackMode::Vanish:
      break;
    case AttackMode::Fabricate:
      for (Detection d : benign_raw.items) {
        d.score = 1.0;
        out.items.push_back(d);
      }
      break;
  }
  return out;
}

Image compose_adversarial(const Image& x, const AttentionMap& attention,
                          const PerturbationMap& perturbation, double epsilon) {
  if (attention.height != x.height || attention.width != x.width)
    throw ValidationError("attention map shape does not match image");
  if (perturbation.height != x.height || perturbation.width != x.width ||
      perturbation.channels != x.channels)
    throw ValidationError("perturbation map shape does not match image");

  Image out(x.height, x.width, x.channels);
  for (int y = 0; y < x.height; ++y) {
    for (int xx = 0; xx < x.width; ++xx) {
      const double a = attention.at(y, xx);
      for (int c = 0; c < x.channels; ++c) {
        const double base = x.at(y, xx, c);
        const double raw = base + a * perturbation.at(y, xx, c);
        const double lo = std::max(0.0, base - epsilon);
        const double hi = std::min(1.0, base + epsilon);
        out.at(y, xx, c) = std::min(std::max(raw, lo), hi);
      }
    }
  }
  return out;
}

AttackState init_state(const Image& x, const VictimAdapter& adapter,
                       const AttackConfig& config) {
  config.validate();
  validate_image(x);

  AttackState st;
  st.anchor = x;
  st.effective_mode = config.mode;
  st.raw_benign = adapter.detect(x, 0.0);
  st.targets = build_pseudo_ground_truth(st.raw_benign, config.mode, config.conf_threshold);

  if (config.mode == AttackMode::Generic && st.targets.empty()) {
    // No benign detection clears the threshold; fall back to fabricate-style
    // targets so dataset runs stay total, and flag the result.
    st.effective_mode = AttackMode::Fabricate;
    st.targets =
        build_pseudo_ground_truth(st.raw_benign, AttackMode::Fabricate, config.conf_threshold);
    st.degenerate_fallback = true;
    if (st.targets.empty())
      throw DegenerateTargetError("no raw detections available for fallback targets");
  }

  st.attention = AttentionMap(x.height, x.width, 1.0);
  st.perturbation = PerturbationMap(x.height, x.width, x.channels);
  Rng rng(config.seed);
  for (double& v : st.perturbation.values) v = rng.uniform(-config.epsilon, config.epsilon);

  const DetectionLoss benign =
      adapter.loss(x, LossSpec{st.effective_mode, st.targets});
  st.benign_reference = LossPoint{benign.total, benign.bbox, benign.cls};

  st.adversarial = compose_adversarial(x, st.attention, st.perturbation, config.epsilon);
  st.k = 0;
  return st;
}

AttackGradients compute_attack_gradients(const AttackState& state, const VictimAdapter& adapter,
                                         const AttackConfig& config) {
  const LossAndGradient lg =
      adapter.loss_and_gradient(state.adversarial, LossSpec{state.effective_mode, state.targets});

  // Descent direction of the attack objective: generic mode climbs the
  // detection loss against its pseudo-targets, vanish/fabricate descend theirs.
  const double mode_sign = state.effective_mode == AttackMode::Generic ? -1.0 : 1.0;

  const Image& x = state.anchor;
  AttackGradients out;
  out.d_attention.assign(static_cast<std::size_t>(x.height) * x.width, 0.0);
  out.d_perturbation.assign(state.perturbation.values.size(), 0.0);
  out.raw_loss = LossPoint{lg.loss.total, lg.loss.bbox, lg.loss.cls};
  for (int y = 0; y < x.height; ++y) {
    for (int xx = 0; xx < x.width; ++xx) {
      const double a = state.attention.at(y, xx);
      double acc = 0.0;
      for (int c = 0; c < x.channels; ++c) {
        const double base = x.at(y, xx, c);
        const double p = state.perturbation.at(y, xx, c);
        const double raw = base + a * p;
        const double lo = std::max(0.0, base - config.epsilon);
        const double hi = std::min(1.0, base + config.epsilon);
        if (raw <= lo || raw >= hi) continue;  // projection active, gradient blocked
        const double dir = mode_sign * lg.gradient.at(y, xx, c);
        acc += dir * p;
        out.d_perturbation[(static_cast<std::size_t>(y) * x.width + xx) * x.channels + c] =
            dir * a;
      }
      out.d_attention[static_cast<std::size_t>(y) * x.width + xx] = acc;
    }
  }
  return out;
}

void step(AttackState& state, const VictimAdapter& adapter, const AttackConfig& config) {
  if (state.k >= config.iterations)
    throw ValidationError("step called past the configured iteration count");

  AttackGradients grads;
  try {
    grads = compute_attack_gradients(state, adapter, config);
  } catch (const NumericalError& e) {
    throw NumericalError("iteration " + std::to_string(state.k) + ": " + e.what());
  }

  if (config.attention_enabled) {
    const std::vector<double> na = normalize_gradient(grads.d_attention);
    for (std::size_t i = 0; i < state.attention.weights.size(); ++i)
      state.attention.weights[i] =
          std::clamp(state.attention.weights[i] - config.alpha_a * na[i], 0.0, config.a_max);
  }
  const std::vector<double> sp = sign_gradient(grads.d_perturbation);
  for (std::size_t i = 0; i < state.perturbation.values.size(); ++i)
    state.perturbation.values[i] -= config.alpha_p * sp[i];

  state.adversarial =
      compose_adversarial(state.anchor, state.attention, state.perturbation, config.epsilon);

  // Trace in the benign-minus-adversarial difference form; a successful attack
  // pushes total down in every mode.
  const double bbox_diff = state.benign_reference.bbox - grads.raw_loss.bbox;
  const double cls_diff = state.benign_reference.cls - grads.raw_loss.cls;
  const double total = state.effective_mode == AttackMode::Generic ? bbox_diff + cls_diff
                                                                   : -(bbox_diff + cls_diff);
  state.trace.push_back(LossPoint{total, bbox_diff, cls_diff});
  ++state.k;
}

AttackResult run_attack(const Image& x, const VictimAdapter& adapter,
                        const AttackConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  AttackState st = init_state(x, adapter, config);
  for (int k = 0; k < config.iterations; ++k) step(st, adapter, config);

  AttackResult res;
  res.adversarial_image = std::move(st.adversarial);
  res.attention = std::move(st.attention);
  res.perturbation = std::move(st.perturbation);
  res.loss_trace = std::move(st.trace);
  res.benign_detections =
      build_pseudo_ground_truth(st.raw_benign, AttackMode::Generic, config.conf_threshold);
  res.adversarial_detections = adapter.detect(res.adversarial_image, config.conf_threshold);
  res.metrics = distortion_metrics(x, res.adversarial_image);
  res.benign_baseline = st.benign_reference;
  res.degenerate_fallback = st.degenerate_fallback;
  res.per_object_success.reserve(res.benign_detections.size());
  for (const Detection& d : res.benign_detections.items)
    res.per_object_success.push_back(
        attack_success(d, res.adversarial_detections, config.gamma));
  res.metrics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace afog
