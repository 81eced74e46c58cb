#include "stackptr/tree_oracle.hpp"

#include <algorithm>
#include <cstdlib>

#include "stackptr/error.hpp"

namespace stackptr {

std::optional<TreeViolation> validate(const std::vector<int>& heads) {
  if (heads.size() < 2) return TreeViolation{0, "tree has no words"};
  const int n = static_cast<int>(heads.size()) - 1;
  for (int i = 1; i <= n; ++i) {
    const int h = heads[static_cast<std::size_t>(i)];
    if (h < 0 || h > n) return TreeViolation{i, "head " + std::to_string(h) + " out of range"};
    if (h == i) return TreeViolation{i, "word heads itself"};
  }
  // 0 = unvisited, 1 = on current path, 2 = known to reach the root.
  std::vector<char> state(heads.size(), 0);
  state[0] = 2;
  for (int i = 1; i <= n; ++i) {
    std::vector<int> path;
    int w = i;
    while (state[static_cast<std::size_t>(w)] == 0) {
      state[static_cast<std::size_t>(w)] = 1;
      path.push_back(w);
      w = heads[static_cast<std::size_t>(w)];
    }
    if (state[static_cast<std::size_t>(w)] == 1) {
      const auto start = std::find(path.begin(), path.end(), w);
      const int lowest = *std::min_element(start, path.end());
      return TreeViolation{lowest, "cycle through word " + std::to_string(lowest)};
    }
    for (int p : path) state[static_cast<std::size_t>(p)] = 2;
  }
  return std::nullopt;
}

std::optional<TreeViolation> validate(const DependencyTree& tree) {
  if (!tree.heads.empty() && tree.heads[0] != kNone) return TreeViolation{0, "root position must have no head"};
  if (tree.labels.size() != tree.heads.size()) return TreeViolation{0, "label count differs from head count"};
  return validate(tree.heads);
}

std::vector<int> heads_from_words(const std::vector<int>& word_heads) {
  std::vector<int> heads;
  heads.reserve(word_heads.size() + 1);
  heads.push_back(kNone);
  heads.insert(heads.end(), word_heads.begin(), word_heads.end());
  return heads;
}

std::vector<int> inside_out_children(const std::vector<int>& heads, int head, ChildOrder order) {
  std::vector<int> left, right;
  for (std::size_t c = 1; c < heads.size(); ++c) {
    if (heads[c] != head) continue;
    (static_cast<int>(c) < head ? left : right).push_back(static_cast<int>(c));
  }
  std::reverse(left.begin(), left.end());
  if (order == ChildOrder::inside_out) {
    left.insert(left.end(), right.begin(), right.end());
    return left;
  }
  std::vector<int> merged;
  std::size_t i = 0, j = 0;
  while (i < left.size() || j < right.size()) {
    if (j == right.size() || (i < left.size() && head - left[i] <= right[j] - head)) merged.push_back(left[i++]);
    else merged.push_back(right[j++]);
  }
  return merged;
}

// ---------------------------------------------------------------------------

ParserState::ParserState(std::size_t n)
    : n_(n),
      stack_{0},
      available_(n + 1, true),
      heads_(n + 1, kNone),
      last_child_(n + 1, kNone),
      remaining_(n) {
  available_[0] = false;
}

StepContext ParserState::context() const {
  StepContext ctx;
  ctx.head = stack_.back();
  ctx.grandparent = stack_.size() >= 2 ? stack_[stack_.size() - 2] : kNone;
  ctx.sibling = last_child_[static_cast<std::size_t>(ctx.head)];
  return ctx;
}

bool ParserState::is_legal(int target, bool single_root) const {
  if (stack_.empty() || target < 0 || static_cast<std::size_t>(target) > n_) return false;
  const int h = stack_.back();
  if (target == h) {
    if (h == 0) return remaining_ == 0;
    // The root's only child may not pop while words are still unattached.
    return !(single_root && stack_.size() == 2 && remaining_ > 0);
  }
  if (!available_[static_cast<std::size_t>(target)]) return false;
  return !(single_root && h == 0 && root_children_ > 0);
}

std::vector<int> ParserState::legal_targets(bool single_root) const {
  std::vector<int> out;
  if (stack_.empty()) return out;
  for (int c = 0; c <= static_cast<int>(n_); ++c)
    if (is_legal(c, single_root)) out.push_back(c);
  return out;
}

DecodeAction ParserState::apply(int target, bool single_root) {
  if (stack_.empty()) throw DataError("action after the root was popped");
  const int h = stack_.back();
  if (!is_legal(target, single_root)) {
    std::string why;
    if (target == h) why = "self-pop of head " + std::to_string(h) + " would leave words unattached";
    else if (target < 0 || static_cast<std::size_t>(target) > n_) why = "target " + std::to_string(target) + " out of range";
    else if (!available_[static_cast<std::size_t>(target)]) why = "word " + std::to_string(target) + " is not available";
    else why = "root already has a child under single-root decoding";
    throw DataError(why);
  }
  if (target == h) {
    stack_.pop_back();
    return DecodeAction::pop(h);
  }
  const auto c = static_cast<std::size_t>(target);
  available_[c] = false;
  heads_[c] = h;
  last_child_[static_cast<std::size_t>(h)] = target;
  --remaining_;
  if (h == 0) ++root_children_;
  stack_.push_back(target);
  return DecodeAction::point(h, target);
}

// ---------------------------------------------------------------------------

OracleSequence oracle(const std::vector<int>& heads, ChildOrder order) {
  if (auto v = validate(heads)) {
    throw DataError("oracle: invalid tree at word " + std::to_string(v->index) + ": " + v->message);
  }
  const std::size_t n = heads.size() - 1;
  std::vector<std::vector<int>> children(n + 1);
  for (std::size_t h = 0; h <= n; ++h) children[h] = inside_out_children(heads, static_cast<int>(h), order);
  std::vector<std::size_t> next(n + 1, 0);

  OracleSequence seq;
  seq.actions.reserve(2 * n + 1);
  seq.contexts.reserve(2 * n + 1);
  ParserState state(n);
  while (!state.done()) {
    const int h = state.top();
    seq.contexts.push_back(state.context());
    auto& k = next[static_cast<std::size_t>(h)];
    const auto& ch = children[static_cast<std::size_t>(h)];
    const int target = k < ch.size() ? ch[k++] : h;
    seq.actions.push_back(state.apply(target));
  }
  return seq;
}

std::vector<int> replay(const std::vector<DecodeAction>& actions, std::size_t n) {
  ParserState state(n);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const DecodeAction& a = actions[i];
    if (state.done()) throw DataError("replay: step " + std::to_string(i) + ": action after the final pop");
    if (a.head != state.top()) {
      throw DataError("replay: step " + std::to_string(i) + ": action fired at head " + std::to_string(a.head) +
                      " but the stack top is " + std::to_string(state.top()));
    }
    if (!a.is_pop() && a.child == a.head) {
      throw DataError("replay: step " + std::to_string(i) + ": word " + std::to_string(a.child) + " points to itself");
    }
    try {
      state.apply(a.is_pop() ? state.top() : a.child);
    } catch (const DataError& e) {
      throw DataError("replay: step " + std::to_string(i) + ": " + e.what());
    }
  }
  if (state.remaining() > 0) throw DataError("replay: unattached words remain");
  if (!state.done()) throw DataError("replay: sequence ended before the root was popped");
  return state.heads();
}

std::vector<StepContext> contexts_for(const std::vector<DecodeAction>& actions, std::size_t n) {
  ParserState state(n);
  std::vector<StepContext> out;
  out.reserve(actions.size());
  for (const DecodeAction& a : actions) {
    out.push_back(state.context());
    state.apply(a.is_pop() ? state.top() : a.child);
  }
  return out;
}

std::vector<int> depths(const std::vector<int>& heads) {
  std::vector<int> d(heads.size(), -1);
  if (!d.empty()) d[0] = 0;
  for (std::size_t i = 1; i < heads.size(); ++i) {
    std::vector<std::size_t> path;
    std::size_t w = i;
    while (d[w] < 0) {
      path.push_back(w);
      w = static_cast<std::size_t>(heads[w]);
    }
    int depth = d[w];
    for (auto it = path.rbegin(); it != path.rend(); ++it) d[*it] = ++depth;
  }
  return d;
}

}  // namespace stackptr
