#include "stackptr/mst.hpp"

#include <limits>

#include "stackptr/error.hpp"

namespace stackptr {

namespace {

using Matrix = std::vector<std::vector<double>>;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Returns the nodes of one cycle in the best-incoming-arc graph, or empty.
std::vector<int> find_cycle(const std::vector<int>& head) {
  const int N = static_cast<int>(head.size());
  std::vector<int> mark(head.size(), -1);
  for (int start = 1; start < N; ++start) {
    int v = start;
    while (v > 0 && mark[v] == -1) {
      mark[v] = start;
      v = head[v];
    }
    if (v > 0 && mark[v] == start) {
      std::vector<int> cycle{v};
      for (int u = head[v]; u != v; u = head[u]) cycle.push_back(u);
      return cycle;
    }
  }
  return {};
}

// Node 0 is the root; s[h][c] is -inf for forbidden arcs.
std::vector<int> chu_liu_edmonds(const Matrix& s) {
  const int N = static_cast<int>(s.size());
  std::vector<int> head(s.size(), -1);
  for (int c = 1; c < N; ++c) {
    double best = kNegInf;
    for (int h = 0; h < N; ++h) {
      if (h != c && (head[c] == -1 || s[h][c] > best)) {
        best = s[h][c];
        head[c] = h;
      }
    }
  }
  const std::vector<int> cycle = find_cycle(head);
  if (cycle.empty()) return head;

  std::vector<bool> in_cycle(s.size(), false);
  for (int v : cycle) in_cycle[v] = true;
  // Non-cycle nodes keep their relative order; the contracted node goes last.
  std::vector<int> to_new(s.size(), -1), to_old;
  for (int v = 0; v < N; ++v) {
    if (!in_cycle[v]) {
      to_new[v] = static_cast<int>(to_old.size());
      to_old.push_back(v);
    }
  }
  const int C = static_cast<int>(to_old.size());
  const int M = C + 1;
  Matrix t(M, std::vector<double>(M, kNegInf));
  std::vector<int> enter(M, -1), leave(M, -1);
  for (int u = 0; u < N; ++u) {
    for (int v = 1; v < N; ++v) {
      if (u == v) continue;
      if (!in_cycle[u] && !in_cycle[v]) {
        t[to_new[u]][to_new[v]] = s[u][v];
      } else if (!in_cycle[u] && in_cycle[v]) {
        const double w = s[u][v] - s[head[v]][v];
        if (enter[to_new[u]] == -1 || w > t[to_new[u]][C]) {
          t[to_new[u]][C] = w;
          enter[to_new[u]] = v;
        }
      } else if (in_cycle[u] && !in_cycle[v]) {
        if (leave[to_new[v]] == -1 || s[u][v] > t[C][to_new[v]]) {
          t[C][to_new[v]] = s[u][v];
          leave[to_new[v]] = u;
        }
      }
    }
  }
  const std::vector<int> sub = chu_liu_edmonds(t);

  std::vector<int> result = head;  // cycle members keep their cycle head unless broken
  for (int v = 1; v < C; ++v) {
    const int h = sub[v];
    result[to_old[v]] = h == C ? leave[v] : to_old[h];
  }
  const int entering = to_old[sub[C]];
  result[enter[sub[C]]] = entering;
  return result;
}

void check_scores(const Matrix& scores) {
  for (std::size_t r = 0; r < scores.size(); ++r) {
    if (scores[r].size() != scores.size()) throw ShapeError("mst_decode: score matrix must be square");
  }
}

Matrix masked(const Matrix& scores) {
  Matrix s = scores;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i][i] = kNegInf;
    s[i][0] = kNegInf;
  }
  return s;
}

}  // namespace

double tree_score(const std::vector<std::vector<double>>& scores, const std::vector<int>& heads) {
  double total = 0.0;
  for (std::size_t c = 1; c < heads.size(); ++c) total += scores[static_cast<std::size_t>(heads[c])][c];
  return total;
}

std::vector<int> mst_decode(const std::vector<std::vector<double>>& scores, bool single_root) {
  check_scores(scores);
  if (scores.empty()) throw ShapeError("mst_decode: empty score matrix");
  const std::size_t N = scores.size();
  if (N == 1) return {-1};
  const Matrix s = masked(scores);
  std::vector<int> best = chu_liu_edmonds(s);
  best[0] = -1;
  std::size_t root_children = 0;
  for (std::size_t c = 1; c < N; ++c) root_children += best[c] == 0;
  if (!single_root || root_children == 1) return best;

  bool found = false;
  double best_score = kNegInf;
  for (std::size_t r = 1; r < N; ++r) {
    Matrix forced = s;
    for (std::size_t c = 1; c < N; ++c) {
      if (c != r) forced[0][c] = kNegInf;
    }
    std::vector<int> tree = chu_liu_edmonds(forced);
    tree[0] = -1;
    const double score = tree_score(scores, tree);
    if (!found || score > best_score) {
      found = true;
      best_score = score;
      best = std::move(tree);
    }
  }
  return best;
}

}  // namespace stackptr
