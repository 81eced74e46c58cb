#pragma once

// Head arrays, inside-out decode-action sequences, and the parser state that
// both the oracle and the decoders drive.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "stackptr/treebank.hpp"

namespace stackptr {

inline constexpr int kNone = -1;

struct TreeViolation {
  int index = 0;  // offending word
  std::string message;
};

/// Single head per word, no self-loops, acyclic, every word reaches 0.
/// Projectivity is not required.
std::optional<TreeViolation> validate(const std::vector<int>& heads);
std::optional<TreeViolation> validate(const DependencyTree& tree);

/// Builds a head array (with heads[0] = -1) from heads of words 1..n.
std::vector<int> heads_from_words(const std::vector<int>& word_heads);

enum class ChildOrder {
  inside_out,              // left children nearest-first, then right nearest-first
  inside_out_interleaved,  // all children by distance, left before right on ties
};

std::vector<int> inside_out_children(const std::vector<int>& heads, int head,
                                     ChildOrder order = ChildOrder::inside_out);

struct DecodeAction {
  enum class Kind { point_child, self_pop };
  Kind kind = Kind::self_pop;
  int head = 0;   // top of stack when the action fired
  int child = 0;  // pointed position; equals head for self_pop

  static DecodeAction point(int head, int child) { return {Kind::point_child, head, child}; }
  static DecodeAction pop(int head) { return {Kind::self_pop, head, head}; }
  bool is_pop() const { return kind == Kind::self_pop; }
  bool operator==(const DecodeAction&) const = default;
};

/// Decoder-input indices at one step: stack top, the element beneath it, and
/// the most recent child of the top. kNone where absent.
struct StepContext {
  int head = 0;
  int grandparent = kNone;
  int sibling = kNone;
  bool operator==(const StepContext&) const = default;
};

struct OracleSequence {
  std::vector<DecodeAction> actions;
  std::vector<StepContext> contexts;
};

/// Mutable stack/availability state shared by the oracle, replay and decoders.
class ParserState {
 public:
  explicit ParserState(std::size_t n);

  std::size_t size() const { return n_; }
  bool done() const { return stack_.empty(); }
  int top() const { return stack_.back(); }
  StepContext context() const;
  const std::vector<int>& stack() const { return stack_; }
  const std::vector<int>& heads() const { return heads_; }
  bool available(int word) const { return available_[static_cast<std::size_t>(word)]; }
  std::size_t remaining() const { return remaining_; }
  int last_child(int head) const { return last_child_[static_cast<std::size_t>(head)]; }
  int root_children() const { return root_children_; }

  /// Positions the top of the stack may point to: every available word, plus
  /// the top itself when popping keeps completion reachable. Ascending order.
  std::vector<int> legal_targets(bool single_root = false) const;
  bool is_legal(int target, bool single_root = false) const;

  /// Applies PointChild(target) or SelfPop (target == top). Throws DataError
  /// if the action is illegal.
  DecodeAction apply(int target, bool single_root = false);

 private:
  std::size_t n_;
  std::vector<int> stack_;
  std::vector<bool> available_;
  std::vector<int> heads_;
  std::vector<int> last_child_;
  std::size_t remaining_;
  int root_children_ = 0;
};

/// Depth-first inside-out action sequence for a valid tree: 2n+1 actions.
OracleSequence oracle(const std::vector<int>& heads, ChildOrder order = ChildOrder::inside_out);

/// Replays actions from the initial state and returns the head array.
std::vector<int> replay(const std::vector<DecodeAction>& actions, std::size_t n);

/// Step contexts seen while replaying an arbitrary legal action sequence.
std::vector<StepContext> contexts_for(const std::vector<DecodeAction>& actions, std::size_t n);

/// Depth of each word (root arcs have depth 1); entry 0 is 0.
std::vector<int> depths(const std::vector<int>& heads);

}  // namespace stackptr
