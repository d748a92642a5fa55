#pragma once
#include <vector>

#include "afog/types.hpp"

namespace afog {

// Raw per-query outputs of a set-prediction head: class logits over K real
// classes plus a trailing no-object class, and boxes as (cx, cy, w, h)
// normalized to [0,1].
struct QueryOutputs {
  int num_queries = 0;
  int num_classes = 0;  // K, excluding no-object
  std::vector<double> logits;  // N x (K+1)
  std::vector<double> boxes;   // N x 4

  double logit(int q, int k) const {
    return logits[static_cast<std::size_t>(q) * (num_classes + 1) + k];
  }
  const double* box(int q) const { return &boxes[static_cast<std::size_t>(q) * 4]; }
};

struct BoxTarget {
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;  // normalized
  int label = 0;
};

struct CriterionWeights {
  double cls = 1.0;
  double l1 = 5.0;
  double iou = 2.0;
  double no_object = 0.1;  // down-weight of the no-object class in the CE term
};

struct CriterionResult {
  double bbox = 0.0;  // matched-pair L1 + (1 - IoU), normalized by target count
  double cls = 0.0;   // weighted-mean cross entropy over all queries
  double total = 0.0;
  std::vector<int> assignment;       // target index -> query index
  std::vector<double> per_target;    // unnormalized pair contribution per target
  std::vector<double> d_logits;      // d total / d logits, N x (K+1)
  std::vector<double> d_boxes;       // d total / d boxes, N x 4
};

// Bipartite-matching detection criterion: optimal assignment of targets to
// queries on a class-probability + L1 + (1 - IoU) cost, cross entropy with a
// no-object class for unmatched queries, box losses on matched pairs.
// Gradients are taken at the fixed optimal assignment. An empty target list is
// valid: every query is pushed toward no-object and the bbox term is zero.
CriterionResult detection_criterion(const QueryOutputs& outputs,
                                    const std::vector<BoxTarget>& targets,
                                    const CriterionWeights& weights);

}  // namespace afog
