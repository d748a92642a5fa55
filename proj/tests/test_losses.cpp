#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "afog/losses.hpp"
#include "afog/rng.hpp"
#include "afog/toy_detector.hpp"
#include "support.hpp"

using namespace afog;

TEST_CASE("normalize_gradient is max-absolute normalization") {
  CHECK(normalize_gradient({2.0, -4.0}) == std::vector<double>{0.5, -1.0});
  CHECK(normalize_gradient({0.0, 0.0, 0.0}) == std::vector<double>{0.0, 0.0, 0.0});

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> g(rng.uniform_int(1, 40));
    for (double& v : g) v = rng.uniform(-5.0, 5.0);
    const std::vector<double> n = normalize_gradient(g);
    double peak = 0.0;
    for (double v : n) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
      peak = std::max(peak, std::abs(v));
    }
    CHECK((peak == doctest::Approx(1.0) || peak == 0.0));
  }
  CHECK_THROWS_AS(normalize_gradient({1.0, std::numeric_limits<double>::infinity()}),
                  NumericalError);
}

TEST_CASE("sign_gradient in {-1, 0, 1} and idempotent") {
  CHECK(sign_gradient({-0.3, 0.0, 2.1}) == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK(sign_gradient({0.0}) == std::vector<double>{0.0});

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> g(rng.uniform_int(1, 40));
    for (double& v : g) v = rng.uniform(-2.0, 2.0);
    const std::vector<double> s = sign_gradient(g);
    CHECK(sign_gradient(s) == s);
    for (double v : s) CHECK((v == -1.0 || v == 0.0 || v == 1.0));
  }
  CHECK_THROWS_AS(sign_gradient({std::numeric_limits<double>::quiet_NaN()}), NumericalError);
}

namespace {

struct LossFixture {
  ToyDetector detector;
  Image image;
  DetectionSet raw;

  LossFixture()
      : detector(ToyDetectorConfig{}, 99),
        image(generate_shapes_dataset(21, 1).items[0].image),
        raw(detector.detect(image, 0.0)) {}
};

}  // namespace

TEST_CASE("mode sign structure of the loss family") {
  LossFixture fx;

  const LossValues generic = afog_loss(fx.detector, fx.image, fx.raw);
  CHECK(generic.total == generic.bbox + generic.cls);
  CHECK(generic.total > 0.0);

  const LossValues vanish = vanishing_loss(fx.detector, fx.image);
  CHECK(vanish.total == -(vanish.bbox + vanish.cls));
  CHECK(vanish.total > 0.0);
  CHECK(vanish.bbox == 0.0);  // no box targets in the empty set

  DetectionSet fab = fx.raw;
  for (Detection& d : fab.items) d.score = 1.0;
  const LossValues fabricate = fabrication_loss(fx.detector, fx.image, fab);
  CHECK(fabricate.total == -(fabricate.bbox + fabricate.cls));
  CHECK(fabricate.total > 0.0);
}

TEST_CASE("degenerate target sets are rejected") {
  LossFixture fx;
  DetectionSet empty;
  empty.num_classes = fx.detector.num_classes();
  CHECK_THROWS_AS(afog_loss(fx.detector, fx.image, empty), DegenerateTargetError);
  CHECK_THROWS_AS(fabrication_loss(fx.detector, fx.image, empty), DegenerateTargetError);
}

TEST_CASE("losses are deterministic and leave the adapter untouched") {
  LossFixture fx;
  const std::uint64_t checksum = fx.detector.parameter_checksum();

  const LossValues a = afog_loss(fx.detector, fx.image, fx.raw);
  const LossValues b = afog_loss(fx.detector, fx.image, fx.raw);
  CHECK(a.total == b.total);
  CHECK(a.bbox == b.bbox);
  CHECK(a.cls == b.cls);
  CHECK(a.per_object == b.per_object);

  const LossValues v1 = vanishing_loss(fx.detector, fx.image);
  const LossValues v2 = vanishing_loss(fx.detector, fx.image);
  CHECK(v1.total == v2.total);

  CHECK(vanishing_loss(fx.detector, Image(128, 128, 3, 0.0)).total ==
        doctest::Approx(vanishing_loss(fx.detector, Image(128, 128, 3, 0.0)).total));
  CHECK(std::isfinite(vanishing_loss(fx.detector, Image(128, 128, 3, 0.0)).total));

  CHECK(fx.detector.parameter_checksum() == checksum);
}

TEST_CASE("mode_loss dispatch matches the dedicated entry points") {
  LossFixture fx;
  DetectionSet empty;
  empty.num_classes = fx.detector.num_classes();
  CHECK(mode_loss(fx.detector, fx.image, AttackMode::Generic, fx.raw).total ==
        afog_loss(fx.detector, fx.image, fx.raw).total);
  CHECK(mode_loss(fx.detector, fx.image, AttackMode::Vanish, empty).total ==
        vanishing_loss(fx.detector, fx.image).total);
  CHECK(mode_loss(fx.detector, fx.image, AttackMode::Fabricate, fx.raw).total ==
        fabrication_loss(fx.detector, fx.image, fx.raw).total);
}
