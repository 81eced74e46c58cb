#pragma once

// Reverse-mode automatic differentiation over row-major double matrices.
//
// A Graph is an append-only tape. Every op appends one node whose inputs are
// strictly earlier nodes, so walking the tape backwards is a reverse
// topological order. Learned weights live in Parameter objects outside the
// graph; a graph only references them, so several graphs may read the same
// parameters concurrently as long as none of them calls backward().

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace stackptr::ag {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// A learned tensor. `grad` accumulates across backward passes until cleared.
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  // Row 0 is a padding row: kept at zero and never updated.
  bool padding_row = false;

  Parameter(std::string n, Shape s, bool pad = false)
      : name(std::move(n)), shape(s), value(s.size(), 0.0), grad(s.size(), 0.0), padding_row(pad) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Owns parameters in creation order; the order is the checkpoint layout.
class ParameterSet {
 public:
  Parameter& add(std::string name, Shape shape, bool padding_row = false);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Mul,
  Concat,
  Slice,
  Sum,
  Max,
  Tanh,
  Sigmoid,
  Elu,
  Softmax,
  Log,
  Lookup,
  Conv1d,
  DropoutApply,
  Reshape,
};

const char* op_name(OpKind op);

struct OpAttrs {
  // Concat/Slice/Sum/Max/Softmax axis; Sum with axis -1 reduces everything.
  int axis = -1;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool transpose_a = false;
  bool transpose_b = false;
  // Lookup row ids; a negative id selects an all-zero row.
  std::vector<int> ids;
  // Conv1d window width (odd).
  std::size_t window = 0;
  // Reshape target.
  Shape shape{};
  // Elu alpha.
  double alpha = 1.0;
};

struct Var {
  std::size_t id = 0;
};

class Graph {
 public:
  explicit Graph(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf bound to a parameter. Repeated calls return the same node.
  Var parameter(Parameter& p);
  /// Leaf holding a copy of `data`; gradients stop here.
  Var constant(Shape shape, std::vector<double> data);
  /// Leaf reading external memory that must outlive the graph.
  Var view(Shape shape, std::span<const double> data);

  /// Generic entry point; the named helpers below all route through it.
  Var apply(OpKind op, std::span<const Var> inputs, const OpAttrs& attrs = {});

  Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var concat(std::span<const Var> parts, int axis);
  Var concat(std::initializer_list<Var> parts, int axis) {
    return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
  }
  Var slice(Var x, int axis, std::size_t begin, std::size_t end);
  Var sum(Var x, int axis = -1);
  Var max(Var x, int axis);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var elu(Var x, double alpha = 1.0);
  Var softmax(Var x, int axis);
  Var log(Var x);
  Var lookup(Var table, std::vector<int> ids);
  Var conv1d(Var input, Var filters, Var bias, std::size_t window);
  Var dropout(Var x, Var mask);
  Var reshape(Var x, Shape shape);

  /// Inverted-dropout mask: entries are 0 with probability `rate`, otherwise
  /// 1/(1-rate). Drawn from the graph rng, so a replay with the same seed
  /// draws the same masks.
  Var dropout_mask(Shape shape, double rate);

  const Shape& shape(Var v) const { return nodes_[v.id].shape; }
  std::span<const double> value(Var v) const;
  double scalar(Var v) const;
  /// Gradient accumulated at a non-parameter node (empty if never reached).
  std::span<const double> grad(Var v) const;
  OpKind op(Var v) const { return nodes_[v.id].op; }

  /// Accumulates d(loss)/d(param) into every reachable Parameter::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    Shape shape;
    std::vector<double> owned;
    // Set for parameter and view leaves; otherwise the value is `owned`.
    const double* external = nullptr;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    Parameter* param = nullptr;
    bool requires_grad = false;
    // Op-specific saved state (argmax positions for Max).
    std::vector<std::size_t> index;
  };

  Var push(Node node);
  const double* val(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external != nullptr ? n.external : n.owned.data();
  }
  double* grad_buffer(std::size_t id);
  void backward_node(std::size_t id);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace stackptr::ag
