// Suites that need the reference trained detector (ctest fixture).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "afog/attack.hpp"
#include "afog/data_io.hpp"
#include "afog/losses.hpp"
#include "afog/metrics.hpp"
#include "afog/rng.hpp"
#include "afog/toy_detector.hpp"
#include "support.hpp"

using namespace afog;

namespace {

struct Trained {
  ToyDetector detector;
  LoadedDataset test_split;

  Trained()
      : detector(ToyDetector::load_file(test::fixture_path("toy.bin"))),
        test_split(load_dataset(test::fixture_path("test/annotations.json"),
                                test::fixture_path("test/images"))) {}

  std::vector<const DatasetItem*> fixtures(std::size_t count) const {
    std::vector<const DatasetItem*> out;
    for (const DatasetItem& item : test_split.items) {
      out.push_back(&item);
      if (out.size() == count) break;
    }
    return out;
  }
};

Trained& trained() {
  static Trained t;
  return t;
}

}  // namespace

TEST_CASE("reference detector meets the training contract on the held-out split") {
  Trained& t = trained();
  ShapesDataset held;
  held.num_classes = t.test_split.num_classes;
  for (const DatasetItem& item : t.test_split.items)
    held.items.push_back(LabeledImage{item.image, item.ground_truth});
  CHECK(evaluate_map50(t.detector, held) >= 0.6);
}

TEST_CASE("a held-out single-square image yields one matching detection") {
  Trained& t = trained();
  const DatasetItem* single_square = nullptr;
  for (const DatasetItem& item : t.test_split.items)
    if (item.ground_truth.size() == 1 && item.ground_truth.items[0].label == 1) {
      single_square = &item;
      break;
    }
  REQUIRE(single_square != nullptr);

  const DetectionSet found = t.detector.detect(single_square->image, 0.5);
  REQUIRE(found.size() >= 1);
  const Detection* best = &found.items[0];
  for (const Detection& d : found.items)
    if (d.score > best->score) best = &d;
  CHECK(best->label == 1);
  CHECK(iou(best->box, single_square->ground_truth.items[0].box) > 0.5);
}

TEST_CASE("random-noise images score above the benign baseline under the generic loss") {
  Trained& t = trained();
  Rng rng(301);
  int above = 0, total = 0;
  for (const DatasetItem* item : t.fixtures(20)) {
    const DetectionSet targets =
        build_pseudo_ground_truth(t.detector.detect(item->image, 0.0), AttackMode::Generic, 0.5);
    if (targets.empty()) continue;
    const double baseline = afog_loss(t.detector, item->image, targets).total;
    const Image noise = test::random_image(rng, 128, 128, 3);
    above += afog_loss(t.detector, noise, targets).total > baseline;
    ++total;
  }
  REQUIRE(total >= 15);
  CHECK(above >= total - 2);
}

TEST_CASE("generic loss at the unperturbed image equals the recorded benign baseline") {
  Trained& t = trained();
  for (const DatasetItem* item : t.fixtures(5)) {
    AttackConfig cfg;
    cfg.iterations = 1;
    const AttackState st = init_state(item->image, t.detector, cfg);
    if (st.degenerate_fallback) continue;
    const LossValues standalone = afog_loss(t.detector, item->image, st.targets);
    CHECK(standalone.total == doctest::Approx(st.benign_reference.total).epsilon(1e-6));
    CHECK(standalone.bbox == doctest::Approx(st.benign_reference.bbox).epsilon(1e-6));
    CHECK(standalone.cls == doctest::Approx(st.benign_reference.cls).epsilon(1e-6));
  }
}

TEST_CASE("images the detector sees as empty sit low in the vanishing-loss ordering") {
  Trained& t = trained();
  Rng rng(303);
  Image background(128, 128, 3);
  for (double& v : background.pixels) v = std::clamp(0.2 + rng.uniform(-0.06, 0.06), 0.0, 1.0);
  REQUIRE(t.detector.detect(background, 0.5).empty());
  const double empty_loss = vanishing_loss(t.detector, background).total;

  std::vector<double> with_detections;
  for (const DatasetItem* item : t.fixtures(20)) {
    if (t.detector.detect(item->image, 0.5).empty()) continue;
    with_detections.push_back(vanishing_loss(t.detector, item->image).total);
  }
  REQUIRE(with_detections.size() >= 10);
  std::sort(with_detections.begin(), with_detections.end());
  const double median = with_detections[with_detections.size() / 2];
  CHECK(empty_loss < median);
}

TEST_CASE("generic attacks drive the trace downward on most fixtures") {
  Trained& t = trained();
  AttackConfig cfg;  // paper defaults: eps 0.031, T 10, alpha_a 0.1
  int decreased = 0, total = 0;
  for (const DatasetItem* item : t.fixtures(20)) {
    const AttackResult res = run_attack(item->image, t.detector, cfg);
    if (res.degenerate_fallback) continue;
    decreased += res.loss_trace.back().total < res.loss_trace.front().total;
    ++total;
  }
  REQUIRE(total >= 15);
  CHECK(decreased * 20 >= total * 18);  // >= 18/20 rate
}

TEST_CASE("vanish attacks empty the detector on nearly all fixtures") {
  Trained& t = trained();
  AttackConfig cfg;
  cfg.mode = AttackMode::Vanish;
  int emptied = 0, total = 0;
  for (const DatasetItem* item : t.fixtures(20)) {
    const AttackResult res = run_attack(item->image, t.detector, cfg);
    emptied += res.adversarial_detections.empty();
    ++total;
  }
  REQUIRE(total == 20);
  CHECK(emptied >= 18);
}

TEST_CASE("fabrication loss decreases across the engine run") {
  Trained& t = trained();
  AttackConfig cfg;
  cfg.mode = AttackMode::Fabricate;
  int decreased = 0, total = 0;
  for (const DatasetItem* item : t.fixtures(10)) {
    const AttackResult res = run_attack(item->image, t.detector, cfg);
    decreased += res.loss_trace.back().total < res.loss_trace.front().total;
    ++total;
  }
  CHECK(decreased >= total - 1);
}

TEST_CASE("fabricate pseudo-targets carry every raw query at score 1.0") {
  Trained& t = trained();
  const DatasetItem* item = t.fixtures(1)[0];
  const DetectionSet raw = t.detector.detect(item->image, 0.0);
  const DetectionSet fab = build_pseudo_ground_truth(raw, AttackMode::Fabricate, 0.5);
  CHECK(fab.size() == static_cast<std::size_t>(t.detector.config().num_queries));
  for (const Detection& d : fab.items) CHECK(d.score == 1.0);
}

TEST_CASE("per-object success flags follow the gamma rule against adversarial detections") {
  Trained& t = trained();
  AttackConfig cfg;
  for (const DatasetItem* item : t.fixtures(5)) {
    const AttackResult res = run_attack(item->image, t.detector, cfg);
    REQUIRE(res.per_object_success.size() == res.benign_detections.size());
    for (std::size_t i = 0; i < res.benign_detections.size(); ++i)
      CHECK(res.per_object_success[i] ==
            attack_success(res.benign_detections.items[i], res.adversarial_detections,
                           cfg.gamma));
  }
}
