#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "afog/attack.hpp"
#include "afog/losses.hpp"
#include "afog/rng.hpp"
#include "afog/toy_detector.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace afog;

namespace {

AttackConfig small_config(AttackMode mode = AttackMode::Generic) {
  AttackConfig cfg;
  cfg.mode = mode;
  cfg.iterations = 4;
  cfg.seed = 11;
  return cfg;
}

struct EngineFixture {
  ToyDetector detector;
  Image image;

  EngineFixture()
      : detector(ToyDetectorConfig{}, 77), image(generate_shapes_dataset(51, 1).items[0].image) {}
};

}  // namespace

TEST_CASE("build_pseudo_ground_truth per mode") {
  DetectionSet raw;
  raw.num_classes = 3;
  raw.items = {Detection{Box{0, 0, 10, 10}, 0, 0.9}, Detection{Box{5, 5, 20, 20}, 1, 0.4}};

  const DetectionSet generic = build_pseudo_ground_truth(raw, AttackMode::Generic, 0.5);
  REQUIRE(generic.size() == 1);
  CHECK(generic.items[0].score == 0.9);

  CHECK(build_pseudo_ground_truth(raw, AttackMode::Vanish, 0.5).empty());

  const DetectionSet fab = build_pseudo_ground_truth(raw, AttackMode::Fabricate, 0.5);
  REQUIRE(fab.size() == 2);
  CHECK(fab.items[0].score == 1.0);
  CHECK(fab.items[1].score == 1.0);
}

TEST_CASE("compose_adversarial clips into the budget and the valid range") {
  Image x(4, 4, 3, 0.5);
  AttentionMap ones(4, 4, 1.0);
  PerturbationMap zero(4, 4, 3, 0.0);
  const double eps = 0.031;

  CHECK(compose_adversarial(x, ones, zero, eps).pixels == x.pixels);

  PerturbationMap big(4, 4, 3, 2.0 * eps);
  for (double v : compose_adversarial(x, ones, big, eps).pixels)
    CHECK(v == doctest::Approx(0.5 + eps));

  Image black(4, 4, 3, 0.0);
  PerturbationMap neg(4, 4, 3, -eps);
  for (double v : compose_adversarial(black, ones, neg, eps).pixels) CHECK(v == 0.0);

  AttentionMap wrong(3, 4, 1.0);
  CHECK_THROWS_AS(compose_adversarial(x, wrong, zero, eps), ValidationError);
}

TEST_CASE("init_state seeds deterministically and within the open interval") {
  EngineFixture fx;
  const AttackConfig cfg = small_config();
  const AttackState a = init_state(fx.image, fx.detector, cfg);
  const AttackState b = init_state(fx.image, fx.detector, cfg);
  CHECK(a.perturbation.values == b.perturbation.values);
  for (double w : a.attention.weights) CHECK(w == 1.0);

  // support of Random(-eps, eps): strictly inside over a massive draw
  Rng rng(cfg.seed);
  double peak = 0.0;
  for (int i = 0; i < 1000000; ++i) peak = std::max(peak, std::abs(rng.uniform(-cfg.epsilon, cfg.epsilon)));
  CHECK(peak < cfg.epsilon);
  for (double v : a.perturbation.values) CHECK(std::abs(v) < cfg.epsilon);
}

TEST_CASE("zero step sizes leave the state unchanged apart from the counter") {
  EngineFixture fx;
  AttackConfig cfg = small_config();
  cfg.mode = AttackMode::Vanish;
  cfg.alpha_p = 1e-300;  // alpha_p must stay positive; this is numerically zero
  cfg.alpha_a = 0.0;
  AttackState st = init_state(fx.image, fx.detector, cfg);
  const std::vector<double> att = st.attention.weights;
  const std::vector<double> pert = st.perturbation.values;
  step(st, fx.detector, cfg);
  CHECK(st.k == 1);
  CHECK(st.attention.weights == att);
  for (std::size_t i = 0; i < pert.size(); ++i)
    CHECK(st.perturbation.values[i] == doctest::Approx(pert[i]).epsilon(1e-12));
  CHECK(st.trace.size() == 1);
}

TEST_CASE("sign update moves unclipped perturbation cells by exactly alpha_p") {
  EngineFixture fx;
  AttackConfig cfg = small_config(AttackMode::Vanish);
  cfg.attention_enabled = false;
  AttackState st = init_state(fx.image, fx.detector, cfg);
  const std::vector<double> before = st.perturbation.values;
  const AttackGradients grads = compute_attack_gradients(st, fx.detector, cfg);
  step(st, fx.detector, cfg);
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double delta = st.perturbation.values[i] - before[i];
    if (grads.d_perturbation[i] == 0.0) {
      CHECK(delta == 0.0);
    } else {
      CHECK(std::abs(delta) == doctest::Approx(cfg.alpha_p));
    }
  }
  for (double w : st.attention.weights) CHECK(w == 1.0);  // attention disabled
}

TEST_CASE("attention gradients agree with finite differences through the composition") {
  // Vanish mode: the loss is free of matched-box terms, so the surface is
  // smooth apart from ReLU kinks and the FD oracle premise holds everywhere.
  EngineFixture fx;
  AttackConfig cfg = small_config(AttackMode::Vanish);
  AttackState st = init_state(fx.image, fx.detector, cfg);
  const AttackGradients grads = compute_attack_gradients(st, fx.detector, cfg);
  const double mode_sign = 1.0;  // vanish descends the detection loss vs the empty set

  Rng rng(71);
  int checked = 0, mismatched = 0;
  AttentionMap att = st.attention;
  for (int probe = 0; probe < 200 && checked < 50; ++probe) {
    const int y = rng.uniform_int(0, fx.image.height - 1);
    const int x = rng.uniform_int(0, fx.image.width - 1);
    const std::size_t idx = static_cast<std::size_t>(y) * fx.image.width + x;
    const double orig = att.at(y, x);
    const auto fd = oracle::central_difference(
        [&](double h) {
          att.at(y, x) = orig + h;
          const Image composed = compose_adversarial(fx.image, att, st.perturbation, cfg.epsilon);
          att.at(y, x) = orig;
          return mode_sign *
                 fx.detector.loss(composed, LossSpec{st.effective_mode, st.targets}).total;
        },
        1e-3);
    if (!fd.smooth) continue;
    ++checked;
    if (!oracle::grad_matches(fd.value, grads.d_attention[idx], 1e-3, 1e-9)) ++mismatched;
  }
  CHECK(checked >= 50);
  CHECK(mismatched == 0);
}

TEST_CASE("run_attack keeps every iterate inside the epsilon ball and valid range") {
  EngineFixture fx;
  for (AttackMode mode : {AttackMode::Generic, AttackMode::Vanish, AttackMode::Fabricate}) {
    AttackConfig cfg = small_config(mode);
    AttackState st = init_state(fx.image, fx.detector, cfg);
    // one ulp of slack: the projection bound is computed as fl(x + eps)
    const double budget = cfg.epsilon * (1.0 + 1e-12);
    for (int k = 0; k < cfg.iterations; ++k) {
      step(st, fx.detector, cfg);
      double peak = 0.0;
      for (std::size_t i = 0; i < st.adversarial.pixels.size(); ++i) {
        peak = std::max(peak, std::abs(st.adversarial.pixels[i] - fx.image.pixels[i]));
        CHECK(st.adversarial.pixels[i] >= 0.0);
        CHECK(st.adversarial.pixels[i] <= 1.0);
      }
      CHECK(peak <= budget);
    }
    CHECK(st.trace.size() == static_cast<std::size_t>(cfg.iterations));
  }
}

TEST_CASE("run_attack is deterministic and fills the result contract") {
  EngineFixture fx;
  const AttackConfig cfg = small_config(AttackMode::Vanish);
  const AttackResult a = run_attack(fx.image, fx.detector, cfg);
  const AttackResult b = run_attack(fx.image, fx.detector, cfg);
  CHECK(a.adversarial_image.pixels == b.adversarial_image.pixels);
  CHECK(a.attention.weights == b.attention.weights);
  CHECK(a.perturbation.values == b.perturbation.values);
  REQUIRE(a.loss_trace.size() == static_cast<std::size_t>(cfg.iterations));
  for (std::size_t i = 0; i < a.loss_trace.size(); ++i)
    CHECK(a.loss_trace[i].total == b.loss_trace[i].total);
  CHECK(a.per_object_success.size() == a.benign_detections.size());
  CHECK(a.metrics.linf <= cfg.epsilon + 1.0 / 255.0);
}

TEST_CASE("untrained detector under generic mode falls back to fabricate-style targets") {
  EngineFixture fx;  // untrained: no benign detection clears 0.5
  const AttackConfig cfg = small_config(AttackMode::Generic);
  REQUIRE(fx.detector.detect(fx.image, cfg.conf_threshold).empty());
  const AttackState st = init_state(fx.image, fx.detector, cfg);
  CHECK(st.degenerate_fallback);
  CHECK(st.effective_mode == AttackMode::Fabricate);
  CHECK(st.targets.size() == static_cast<std::size_t>(fx.detector.config().num_queries));
  const AttackResult res = run_attack(fx.image, fx.detector, cfg);
  CHECK(res.degenerate_fallback);
}

TEST_CASE("generic fixed point: the engine's benign reference equals the standalone loss") {
  EngineFixture fx;
  AttackConfig cfg = small_config(AttackMode::Fabricate);
  const AttackState st = init_state(fx.image, fx.detector, cfg);
  const LossValues standalone = fabrication_loss(fx.detector, fx.image, st.targets);
  CHECK(standalone.total ==
        doctest::Approx(st.benign_reference.bbox + st.benign_reference.cls).epsilon(1e-6));
}

TEST_CASE("attention stays within its clamp across many steps") {
  EngineFixture fx;
  AttackConfig cfg = small_config(AttackMode::Vanish);
  cfg.iterations = 12;
  cfg.alpha_a = 0.7;  // exaggerated step to force clamping
  AttackState st = init_state(fx.image, fx.detector, cfg);
  for (int k = 0; k < cfg.iterations; ++k) {
    step(st, fx.detector, cfg);
    for (double w : st.attention.weights) {
      CHECK(w >= 0.0);
      CHECK(w <= cfg.a_max);
    }
  }
}
