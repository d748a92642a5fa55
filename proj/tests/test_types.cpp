#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "afog/rng.hpp"
#include "afog/types.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace afog;

TEST_CASE("validate_image accepts a well-formed image unchanged") {
  Image img(2, 2, 3, 0.5);
  const Image& same = validate_image(img);
  CHECK(&same == &img);
}

TEST_CASE("validate_image names the violated invariant") {
  Image img(2, 2, 3, 0.5);
  img.at(0, 1, 2) = 1.5;
  CHECK_THROWS_WITH_AS(validate_image(img), doctest::Contains("out of [0,1]"), ValidationError);

  img.at(0, 1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(validate_image(img), doctest::Contains("non-finite"), ValidationError);

  Image bad_channels(2, 2, 3, 0.5);
  bad_channels.channels = 2;
  CHECK_THROWS_AS(validate_image(bad_channels), ValidationError);

  Image empty;
  CHECK_THROWS_AS(validate_image(empty), ValidationError);
}

TEST_CASE("iou on the spec cases") {
  CHECK(iou(Box{0, 0, 2, 2}, Box{0, 0, 2, 2}) == doctest::Approx(1.0));
  CHECK(iou(Box{0, 0, 1, 1}, Box{2, 2, 3, 3}) == doctest::Approx(0.0));
  const double v = iou(Box{0, 0, 2, 2}, Box{1, 1, 3, 3});
  CHECK(v == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(std::abs(v - oracle::iou_pixel_grid(Box{0, 0, 2, 2}, Box{1, 1, 3, 3})) < 1e-3);
}

TEST_CASE("iou properties over random boxes") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const Box a = test::random_box(rng);
    const Box b = test::random_box(rng);
    const double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(iou(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("iou matches the pixel-grid oracle on random pairs") {
  Rng rng(17);
  for (int i = 0; i < 25; ++i) {
    const Box a = test::random_box(rng, 40.0);
    const Box b = test::random_box(rng, 40.0);
    CHECK(std::abs(iou(a, b) - oracle::iou_pixel_grid(a, b)) < 1e-3);
  }
}

TEST_CASE("attack config invariants") {
  AttackConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.epsilon == doctest::Approx(0.031));
  CHECK(cfg.iterations == 10);
  CHECK(cfg.alpha_a == doctest::Approx(0.1));
  CHECK(cfg.conf_threshold == doctest::Approx(0.5));
  CHECK(cfg.gamma == doctest::Approx(0.5));

  AttackConfig bad = cfg;
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.alpha_p = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.alpha_a = -0.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.conf_threshold = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("attack mode names round-trip") {
  CHECK(attack_mode_from_string("afog") == AttackMode::Generic);
  CHECK(attack_mode_from_string("generic") == AttackMode::Generic);
  CHECK(attack_mode_from_string("vanish") == AttackMode::Vanish);
  CHECK(attack_mode_from_string("fabricate") == AttackMode::Fabricate);
  CHECK(to_string(AttackMode::Generic) == "afog");
  CHECK_THROWS_AS(attack_mode_from_string("bogus"), ValidationError);
}

TEST_CASE("detection set validation") {
  DetectionSet ds;
  ds.num_classes = 3;
  ds.items.push_back(Detection{Box{0, 0, 5, 5}, 2, 0.7});
  CHECK_NOTHROW(validate_detection_set(ds));
  ds.items.push_back(Detection{Box{0, 0, 5, 5}, 3, 0.7});
  CHECK_THROWS_AS(validate_detection_set(ds), ValidationError);
  ds.items.clear();
  ds.items.push_back(Detection{Box{5, 0, 5, 5}, 0, 0.7});  // x1 == x2
  CHECK_THROWS_AS(validate_detection_set(ds), ValidationError);
}
