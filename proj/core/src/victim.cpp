#include "afog/victim.hpp"

#include "afog/hungarian.hpp"

namespace afog {

std::vector<std::pair<int, int>> match_predictions(const DetectionSet& preds,
                                                   const DetectionSet& targets) {
  const int np = static_cast<int>(preds.size());
  const int nt = static_cast<int>(targets.size());
  if (np == 0 || nt == 0) return {};

  std::vector<double> cost(static_cast<std::size_t>(np) * nt);
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nt; ++j) {
      const double mismatch = preds.items[i].label == targets.items[j].label ? 0.0 : 1.0;
      cost[static_cast<std::size_t>(i) * nt + j] =
          mismatch + (1.0 - iou(preds.items[i].box, targets.items[j].box));
    }

  const std::vector<int> row_to_col = solve_assignment(cost, np, nt);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < np; ++i)
    if (row_to_col[i] >= 0) pairs.emplace_back(i, row_to_col[i]);
  return pairs;
}

}  // namespace afog
