#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "afog/shapes.hpp"

using namespace afog;

TEST_CASE("generation is deterministic for a fixed seed") {
  const ShapesDataset a = generate_shapes_dataset(0, 10);
  const ShapesDataset b = generate_shapes_dataset(0, 10);
  REQUIRE(a.items.size() == 10);
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].image.pixels == b.items[i].image.pixels);
    REQUIRE(a.items[i].ground_truth.size() == b.items[i].ground_truth.size());
    for (std::size_t j = 0; j < a.items[i].ground_truth.size(); ++j) {
      const Detection &da = a.items[i].ground_truth.items[j];
      const Detection &db = b.items[i].ground_truth.items[j];
      CHECK(da.box.x1 == db.box.x1);
      CHECK(da.box.y2 == db.box.y2);
      CHECK(da.label == db.label);
    }
  }
}

TEST_CASE("generator contract: shapes, bounds, counts") {
  const ShapesDataset ds = generate_shapes_dataset(42, 50);
  for (const LabeledImage &li : ds.items) {
    CHECK(li.image.height == 128);
    CHECK(li.image.width == 128);
    CHECK(li.image.channels == 3);
    CHECK_NOTHROW(validate_image(li.image));
    CHECK(li.ground_truth.size() >= 1);
    CHECK(li.ground_truth.size() <= 5);
    for (const Detection &d : li.ground_truth.items) {
      CHECK(d.label >= 0);
      CHECK(d.label < 3);
      CHECK(d.box.x1 >= 0.0);
      CHECK(d.box.y1 >= 0.0);
      CHECK(d.box.x2 <= 128.0);
      CHECK(d.box.y2 <= 128.0);
      CHECK(box_valid(d.box));
    }
  }
}

TEST_CASE("ground-truth boxes tightly bound their shapes") {
  const ShapesDataset ds = generate_shapes_dataset(9, 25);
  for (const LabeledImage &li : ds.items) {
    for (const Detection &d : li.ground_truth.items) {
      // A tight box is never degenerate and never larger than the max extent.
      CHECK(d.box.width() >= 20.0);
      CHECK(d.box.width() <= 52.0);
      CHECK(d.box.height() == doctest::Approx(d.box.width()));
    }
  }
}

TEST_CASE("class histogram is approximately uniform at n=3000") {
  const ShapesDataset ds = generate_shapes_dataset(123, 3000);
  long counts[3] = {0, 0, 0};
  long total = 0;
  for (const LabeledImage &li : ds.items)
    for (const Detection &d : li.ground_truth.items) {
      ++counts[d.label];
      ++total;
    }
  for (long c : counts) {
    const double frac = static_cast<double>(c) / static_cast<double>(total);
    CHECK(frac >= 0.28);
    CHECK(frac <= 0.39);
  }
}

TEST_CASE("invalid size is rejected") {
  CHECK_THROWS_AS(generate_shapes_dataset(0, 0), ValidationError);
}
