#pragma once

// Maximum spanning arborescence (Chu-Liu-Edmonds) over a dense score matrix.

#include <vector>

namespace stackptr {

/// scores[h][c] is the score of arc h -> c over nodes 0..n; column 0 and the
/// diagonal are ignored. Returns heads with heads[0] = -1. With
/// `single_root`, node 0 gets exactly one child: each candidate root child is
/// forced in turn and the best resulting tree is kept.
std::vector<int> mst_decode(const std::vector<std::vector<double>>& scores, bool single_root = false);

/// Sum of scores[heads[c]][c] over c >= 1.
double tree_score(const std::vector<std::vector<double>>& scores, const std::vector<int>& heads);

}  // namespace stackptr
