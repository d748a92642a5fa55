#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "afog/rng.hpp"
#include "afog/set_criterion.hpp"
#include "oracles.hpp"

using namespace afog;

namespace {

QueryOutputs random_outputs(Rng& rng, int n, int k) {
  QueryOutputs out;
  out.num_queries = n;
  out.num_classes = k;
  out.logits.resize(static_cast<std::size_t>(n) * (k + 1));
  out.boxes.resize(static_cast<std::size_t>(n) * 4);
  for (double& v : out.logits) v = rng.uniform(-2.0, 2.0);
  for (double& v : out.boxes) v = rng.uniform(0.05, 0.95);
  return out;
}

std::vector<BoxTarget> random_targets(Rng& rng, int count, int k) {
  std::vector<BoxTarget> t(count);
  for (BoxTarget& bt : t) {
    bt.cx = rng.uniform(0.2, 0.8);
    bt.cy = rng.uniform(0.2, 0.8);
    bt.w = rng.uniform(0.05, 0.3);
    bt.h = rng.uniform(0.05, 0.3);
    bt.label = rng.uniform_int(0, k - 1);
  }
  return t;
}

}  // namespace

TEST_CASE("perfectly matching single object: per-target value is the raw cross entropy") {
  QueryOutputs out;
  out.num_queries = 1;
  out.num_classes = 2;
  out.logits = {1.7, -0.4, 0.2};  // classes 0, 1, no-object
  const BoxTarget target{0.5, 0.5, 0.25, 0.25, 0};
  out.boxes = {target.cx, target.cy, target.w, target.h};

  const CriterionResult res = detection_criterion(out, {target}, CriterionWeights{});

  // hand-computed cross entropy of the true class
  const double z = std::exp(1.7) + std::exp(-0.4) + std::exp(0.2);
  const double expected_ce = -std::log(std::exp(1.7) / z);
  REQUIRE(res.per_target.size() == 1);
  CHECK(res.assignment[0] == 0);
  CHECK(res.per_target[0] == doctest::Approx(expected_ce).epsilon(1e-12));
  CHECK(res.bbox == doctest::Approx(0.0));  // exact box match: no L1, no IoU deficit
  CHECK(res.total == doctest::Approx(res.bbox + res.cls).epsilon(1e-12));
}

TEST_CASE("empty target set pushes every query toward no-object") {
  Rng rng(3);
  const QueryOutputs out = random_outputs(rng, 4, 2);
  const CriterionResult res = detection_criterion(out, {}, CriterionWeights{});
  CHECK(res.bbox == 0.0);
  CHECK(res.cls > 0.0);
  CHECK(std::isfinite(res.total));
  // gradient pushes no-object logits up (negative gradient on the no-object slot)
  for (int q = 0; q < 4; ++q) CHECK(res.d_logits[q * 3 + 2] < 0.0);
  // and box gradients vanish without matched pairs
  for (double g : res.d_boxes) CHECK(g == 0.0);
}

TEST_CASE("criterion totals decompose and assignments are one-to-one") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const QueryOutputs out = random_outputs(rng, 6, 3);
    const std::vector<BoxTarget> targets = random_targets(rng, rng.uniform_int(1, 5), 3);
    const CriterionResult res = detection_criterion(out, targets, CriterionWeights{});
    CHECK(res.total == doctest::Approx(res.bbox + res.cls).epsilon(1e-9));
    std::vector<char> used(6, 0);
    for (int q : res.assignment) {
      REQUIRE(q >= 0);
      CHECK(!used[q]);
      used[q] = 1;
    }
  }
}

TEST_CASE("criterion gradients match finite differences") {
  Rng rng(11);
  const CriterionWeights weights;
  int checked = 0, skipped = 0;
  for (int trial = 0; trial < 12; ++trial) {
    QueryOutputs out = random_outputs(rng, 5, 2);
    const std::vector<BoxTarget> targets = random_targets(rng, rng.uniform_int(1, 4), 2);
    const CriterionResult base = detection_criterion(out, targets, weights);

    auto probe = [&](std::vector<double>& field, std::size_t idx, double analytic) {
      const double orig = field[idx];
      const auto fd = oracle::central_difference(
          [&](double h) {
            field[idx] = orig + h;
            const double v = detection_criterion(out, targets, weights).total;
            field[idx] = orig;
            return v;
          },
          1e-6);
      if (!fd.smooth) {
        ++skipped;
        return;
      }
      CHECK(oracle::grad_matches(fd.value, analytic, 1e-4, 1e-9));
      ++checked;
    };

    for (int probe_i = 0; probe_i < 10; ++probe_i) {
      const std::size_t li =
          static_cast<std::size_t>(rng.uniform01() * static_cast<double>(out.logits.size()));
      probe(out.logits, li, base.d_logits[li]);
      const std::size_t bi =
          static_cast<std::size_t>(rng.uniform01() * static_cast<double>(out.boxes.size()));
      probe(out.boxes, bi, base.d_boxes[bi]);
    }
  }
  CHECK(checked >= 150);  // the kink guard may drop a few samples, not many
}
