#include "afog/set_criterion.hpp"

#include <algorithm>
#include <cmath>

#include "afog/hungarian.hpp"

namespace afog {

namespace {

struct SoftmaxCe {
  std::vector<double> probs;
  double ce = 0.0;  // logsumexp - logit[target]
};

SoftmaxCe softmax_ce(const double* logits, int n, int target) {
  SoftmaxCe out;
  out.probs.resize(n);
  double m = logits[0];
  for (int k = 1; k < n; ++k) m = std::max(m, logits[k]);
  double z = 0.0;
  for (int k = 0; k < n; ++k) z += std::exp(logits[k] - m);
  const double logz = std::log(z) + m;
  for (int k = 0; k < n; ++k) out.probs[k] = std::exp(logits[k] - logz);
  out.ce = logz - logits[target];
  return out;
}

struct IouGrad {
  double value = 0.0;
  double d_cx = 0.0, d_cy = 0.0, d_w = 0.0, d_h = 0.0;
};

// IoU of a (cx,cy,w,h) query box against a fixed target, with partials taken
// at the fixed min/max selections; exact ties get subgradient zero.
IouGrad iou_cxcywh(const double* q, const BoxTarget& t) {
  IouGrad g;
  const double qx1 = q[0] - 0.5 * q[2], qx2 = q[0] + 0.5 * q[2];
  const double qy1 = q[1] - 0.5 * q[3], qy2 = q[1] + 0.5 * q[3];
  const double tx1 = t.cx - 0.5 * t.w, tx2 = t.cx + 0.5 * t.w;
  const double ty1 = t.cy - 0.5 * t.h, ty2 = t.cy + 0.5 * t.h;

  const double iw = std::min(qx2, tx2) - std::max(qx1, tx1);
  const double ih = std::min(qy2, ty2) - std::max(qy1, ty1);
  if (iw <= 0.0 || ih <= 0.0) return g;

  const double inter = iw * ih;
  const double uni = q[2] * q[3] + t.w * t.h - inter;
  g.value = inter / uni;

  const double d_iou_d_inter = (uni + inter) / (uni * uni);
  const double d_iou_d_area = -inter / (uni * uni);

  const double di_dqx1 = qx1 > tx1 ? -ih : 0.0;
  const double di_dqx2 = qx2 < tx2 ? ih : 0.0;
  const double di_dqy1 = qy1 > ty1 ? -iw : 0.0;
  const double di_dqy2 = qy2 < ty2 ? iw : 0.0;

  g.d_cx = d_iou_d_inter * (di_dqx1 + di_dqx2);
  g.d_cy = d_iou_d_inter * (di_dqy1 + di_dqy2);
  g.d_w = d_iou_d_inter * (0.5 * di_dqx2 - 0.5 * di_dqx1) + d_iou_d_area * q[3];
  g.d_h = d_iou_d_inter * (0.5 * di_dqy2 - 0.5 * di_dqy1) + d_iou_d_area * q[2];
  return g;
}

}  // namespace

CriterionResult detection_criterion(const QueryOutputs& outputs,
                                    const std::vector<BoxTarget>& targets,
                                    const CriterionWeights& weights) {
  const int nq = outputs.num_queries;
  const int nc = outputs.num_classes + 1;  // + no-object
  const int nt = static_cast<int>(targets.size());
  const int no_object = outputs.num_classes;

  CriterionResult res;
  res.assignment.assign(nt, -1);
  res.per_target.assign(nt, 0.0);
  res.d_logits.assign(static_cast<std::size_t>(nq) * nc, 0.0);
  res.d_boxes.assign(static_cast<std::size_t>(nq) * 4, 0.0);

  // Per-query softmax is reused by both the matching cost and the CE term.
  std::vector<SoftmaxCe> cache(nq);
  for (int q = 0; q < nq; ++q)
    cache[q] = softmax_ce(&outputs.logits[static_cast<std::size_t>(q) * nc], nc, no_object);

  if (nt > 0) {
    std::vector<double> cost(static_cast<std::size_t>(nt) * nq);
    for (int t = 0; t < nt; ++t) {
      for (int q = 0; q < nq; ++q) {
        const double* qb = outputs.box(q);
        const double l1 = std::abs(qb[0] - targets[t].cx) + std::abs(qb[1] - targets[t].cy) +
                          std::abs(qb[2] - targets[t].w) + std::abs(qb[3] - targets[t].h);
        const double overlap = iou_cxcywh(qb, targets[t]).value;
        cost[static_cast<std::size_t>(t) * nq + q] =
            weights.cls * (-cache[q].probs[targets[t].label]) + weights.l1 * l1 +
            weights.iou * (1.0 - overlap);
      }
    }
    res.assignment = solve_assignment(cost, nt, nq);
  }

  // Class targets and CE weights per query; unmatched queries carry no-object.
  std::vector<int> cls_target(nq, no_object);
  std::vector<double> ce_weight(nq, weights.no_object);
  for (int t = 0; t < nt; ++t) {
    const int q = res.assignment[t];
    if (q < 0) continue;
    cls_target[q] = targets[t].label;
    ce_weight[q] = 1.0;
  }

  double weight_sum = 0.0;
  for (int q = 0; q < nq; ++q) weight_sum += ce_weight[q];

  double cls_acc = 0.0;
  for (int q = 0; q < nq; ++q) {
    const SoftmaxCe sc =
        cls_target[q] == no_object
            ? cache[q]
            : softmax_ce(&outputs.logits[static_cast<std::size_t>(q) * nc], nc, cls_target[q]);
    cls_acc += ce_weight[q] * sc.ce;
    const double scale = weights.cls * ce_weight[q] / weight_sum;
    for (int k = 0; k < nc; ++k) {
      res.d_logits[static_cast<std::size_t>(q) * nc + k] +=
          scale * (sc.probs[k] - (k == cls_target[q] ? 1.0 : 0.0));
    }
  }
  res.cls = weights.cls * cls_acc / weight_sum;

  double bbox_acc = 0.0;
  const double inv_nt = nt > 0 ? 1.0 / nt : 0.0;
  for (int t = 0; t < nt; ++t) {
    const int q = res.assignment[t];
    if (q < 0) continue;
    const double* qb = outputs.box(q);
    const double d[4] = {qb[0] - targets[t].cx, qb[1] - targets[t].cy, qb[2] - targets[t].w,
                         qb[3] - targets[t].h};
    const double l1 = std::abs(d[0]) + std::abs(d[1]) + std::abs(d[2]) + std::abs(d[3]);
    const IouGrad ig = iou_cxcywh(qb, targets[t]);
    const double pair_loss = weights.l1 * l1 + weights.iou * (1.0 - ig.value);
    bbox_acc += pair_loss;

    double* db = &res.d_boxes[static_cast<std::size_t>(q) * 4];
    for (int k = 0; k < 4; ++k) {
      const double sgn = d[k] > 0.0 ? 1.0 : (d[k] < 0.0 ? -1.0 : 0.0);
      db[k] += inv_nt * weights.l1 * sgn;
    }
    db[0] += inv_nt * weights.iou * -ig.d_cx;
    db[1] += inv_nt * weights.iou * -ig.d_cy;
    db[2] += inv_nt * weights.iou * -ig.d_w;
    db[3] += inv_nt * weights.iou * -ig.d_h;

    const double ce = softmax_ce(&outputs.logits[static_cast<std::size_t>(q) * nc], nc,
                                 targets[t].label)
                          .ce;
    res.per_target[t] = pair_loss + weights.cls * ce;
  }
  res.bbox = bbox_acc * inv_nt;
  res.total = res.bbox + res.cls;
  return res;
}

}  // namespace afog
