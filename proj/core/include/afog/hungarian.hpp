#pragma once
#include <vector>

namespace afog {

// Min-cost one-to-one assignment on a dense rows x cols matrix (row-major),
// Jonker-Volgenant style shortest augmenting paths, O(n^3). Exactly
// min(rows, cols) pairs are assigned; result[r] is the column matched to row r
// or -1. Costs may be negative; they must be finite.
std::vector<int> solve_assignment(const std::vector<double>& cost, int rows, int cols);

}  // namespace afog
