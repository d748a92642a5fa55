#include "afog/losses.hpp"

#include <cmath>

#include "afog/errors.hpp"

namespace afog {

namespace {

LossValues from_detection_loss(const DetectionLoss& d, AttackMode mode) {
  LossValues lv;
  lv.per_object = d.per_target;
  if (mode == AttackMode::Generic) {
    lv.bbox = d.bbox;
    lv.cls = d.cls;
    lv.total = lv.bbox + lv.cls;
  } else {
    lv.bbox = -d.bbox;
    lv.cls = -d.cls;
    lv.total = -(lv.bbox + lv.cls);
  }
  return lv;
}

}  // namespace

LossValues afog_loss(const VictimAdapter& adapter, const Image& x_adv,
                     const DetectionSet& targets) {
  if (targets.empty())
    throw DegenerateTargetError("generic attack loss needs at least one benign detection");
  return from_detection_loss(adapter.loss(x_adv, LossSpec{AttackMode::Generic, targets}),
                             AttackMode::Generic);
}

LossValues vanishing_loss(const VictimAdapter& adapter, const Image& x_adv) {
  DetectionSet empty;
  empty.num_classes = adapter.num_classes();
  return from_detection_loss(adapter.loss(x_adv, LossSpec{AttackMode::Vanish, empty}),
                             AttackMode::Vanish);
}

LossValues fabrication_loss(const VictimAdapter& adapter, const Image& x_adv,
                            const DetectionSet& o_f) {
  if (o_f.empty()) throw DegenerateTargetError("fabrication loss needs a non-empty target set");
  return from_detection_loss(adapter.loss(x_adv, LossSpec{AttackMode::Fabricate, o_f}),
                             AttackMode::Fabricate);
}

LossValues mode_loss(const VictimAdapter& adapter, const Image& x_adv, AttackMode mode,
                     const DetectionSet& targets) {
  switch (mode) {
    case AttackMode::Generic: return afog_loss(adapter, x_adv, targets);
    case AttackMode::Vanish: return vanishing_loss(adapter, x_adv);
    case AttackMode::Fabricate: return fabrication_loss(adapter, x_adv, targets);
  }
  throw ValidationError("unreachable attack mode");
}

std::vector<double> normalize_gradient(const std::vector<double>& g) {
  double peak = 0.0;
  for (double v : g) {
    if (!std::isfinite(v)) throw NumericalError("normalize_gradient: non-finite input");
    peak = std::max(peak, std::abs(v));
  }
  std::vector<double> out(g.size(), 0.0);
  if (peak == 0.0) return out;
  const double inv = 1.0 / peak;
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * inv;
  return out;
}

std::vector<double> sign_gradient(const std::vector<double>& g) {
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw NumericalError("sign_gradient: non-finite input");
    out[i] = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

}  // namespace afog
