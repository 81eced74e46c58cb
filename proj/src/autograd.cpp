#include "stackptr/autograd.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <sstream>

#include "stackptr/error.hpp"

namespace stackptr::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap cmap(const double* p, const Shape& s) {
  return ConstMap(p, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}
MutMap mmap(double* p, const Shape& s) {
  return MutMap(p, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}

[[noreturn]] void shape_fail(OpKind op, const std::string& what, std::initializer_list<Shape> shapes) {
  std::ostringstream os;
  os << op_name(op) << ": " << what << " (shapes:";
  for (const Shape& s : shapes) os << ' ' << to_string(s);
  os << ')';
  throw ShapeError(os.str());
}

bool broadcastable(const Shape& a, const Shape& b) {
  return (b.rows == a.rows || b.rows == 1) && (b.cols == a.cols || b.cols == 1);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Sum: return "sum";
    case OpKind::Max: return "max";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Elu: return "elu";
    case OpKind::Softmax: return "softmax";
    case OpKind::Log: return "log";
    case OpKind::Lookup: return "lookup";
    case OpKind::Conv1d: return "conv1d";
    case OpKind::DropoutApply: return "dropout";
    case OpKind::Reshape: return "reshape";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(std::string name, Shape shape, bool padding_row) {
  if (index_.count(name) != 0) throw std::invalid_argument("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(std::move(name), shape, padding_row));
  return *params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return *params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return *params_[it->second];
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------------------
// Graph: leaves

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Graph::parameter(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  Node n;
  n.shape = p.shape;
  n.external = p.value.data();
  n.param = &p;
  n.requires_grad = true;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Graph::constant(Shape shape, std::vector<double> data) {
  if (data.size() != shape.size()) {
    throw ShapeError("constant: data length " + std::to_string(data.size()) + " does not match " +
                     to_string(shape));
  }
  Node n;
  n.shape = shape;
  n.owned = std::move(data);
  return push(std::move(n));
}

Var Graph::view(Shape shape, std::span<const double> data) {
  if (data.size() != shape.size()) {
    throw ShapeError("view: data length " + std::to_string(data.size()) + " does not match " +
                     to_string(shape));
  }
  Node n;
  n.shape = shape;
  n.external = data.data();
  return push(std::move(n));
}

Var Graph::dropout_mask(Shape shape, double rate) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  std::vector<double> m(shape.size());
  const double keep = 1.0 / (1.0 - rate);
  for (double& x : m) x = uniform01(rng_) < rate ? 0.0 : keep;
  draws_ += m.size();
  return constant(shape, std::move(m));
}

// ---------------------------------------------------------------------------
// Graph: forward

Var Graph::apply(OpKind op, std::span<const Var> inputs, const OpAttrs& attrs) {
  auto need = [&](std::size_t k) {
    if (inputs.size() != k && !(op == OpKind::Concat && !inputs.empty())) {
      throw std::invalid_argument(std::string(op_name(op)) + ": expected " + std::to_string(k) +
                                  " inputs, got " + std::to_string(inputs.size()));
    }
    for (const Var& v : inputs) {
      if (v.id >= nodes_.size()) throw std::invalid_argument(std::string(op_name(op)) + ": dangling input");
    }
  };

  Node n;
  n.op = op;
  n.attrs = attrs;
  for (const Var& v : inputs) n.inputs.push_back(v.id);

  switch (op) {
    case OpKind::MatMul: {
      need(2);
      const Shape& a = shape(inputs[0]);
      const Shape& b = shape(inputs[1]);
      const std::size_t m = attrs.transpose_a ? a.cols : a.rows;
      const std::size_t ka = attrs.transpose_a ? a.rows : a.cols;
      const std::size_t kb = attrs.transpose_b ? b.cols : b.rows;
      const std::size_t p = attrs.transpose_b ? b.rows : b.cols;
      if (ka != kb) shape_fail(op, "inner dimensions differ", {a, b});
      n.shape = {m, p};
      n.owned.assign(n.shape.size(), 0.0);
      auto out = mmap(n.owned.data(), n.shape);
      auto A = cmap(val(inputs[0].id), a);
      auto B = cmap(val(inputs[1].id), b);
      if (!attrs.transpose_a && !attrs.transpose_b) out.noalias() = A * B;
      else if (attrs.transpose_a && !attrs.transpose_b) out.noalias() = A.transpose() * B;
      else if (!attrs.transpose_a && attrs.transpose_b) out.noalias() = A * B.transpose();
      else out.noalias() = A.transpose() * B.transpose();
      break;
    }
    case OpKind::Add:
    case OpKind::Mul:
    case OpKind::DropoutApply: {
      need(2);
      const Shape& a = shape(inputs[0]);
      const Shape& b = shape(inputs[1]);
      if (!broadcastable(a, b)) shape_fail(op, "right operand does not broadcast to left", {a, b});
      n.shape = a;
      n.owned.resize(a.size());
      const double* x = val(inputs[0].id);
      const double* y = val(inputs[1].id);
      const bool add = op == OpKind::Add;
      for (std::size_t r = 0; r < a.rows; ++r) {
        const std::size_t br = b.rows == 1 ? 0 : r;
        for (std::size_t c = 0; c < a.cols; ++c) {
          const double yv = y[br * b.cols + (b.cols == 1 ? 0 : c)];
          const double xv = x[r * a.cols + c];
          n.owned[r * a.cols + c] = add ? xv + yv : xv * yv;
        }
      }
      break;
    }
    case OpKind::Concat: {
      need(inputs.size());
      if (inputs.empty()) throw std::invalid_argument("concat: no inputs");
      if (attrs.axis != 0 && attrs.axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
      Shape out = shape(inputs[0]);
      for (std::size_t i = 1; i < inputs.size(); ++i) {
        const Shape& s = shape(inputs[i]);
        if (attrs.axis == 0) {
          if (s.cols != out.cols) shape_fail(op, "column counts differ", {shape(inputs[0]), s});
          out.rows += s.rows;
        } else {
          if (s.rows != out.rows) shape_fail(op, "row counts differ", {shape(inputs[0]), s});
          out.cols += s.cols;
        }
      }
      n.shape = out;
      n.owned.resize(out.size());
      std::size_t offset = 0;
      for (const Var& v : inputs) {
        const Shape& s = shape(v);
        const double* src = val(v.id);
        if (attrs.axis == 0) {
          std::copy(src, src + s.size(), n.owned.begin() + static_cast<std::ptrdiff_t>(offset * out.cols));
          offset += s.rows;
        } else {
          for (std::size_t r = 0; r < s.rows; ++r) {
            std::copy(src + r * s.cols, src + (r + 1) * s.cols,
                      n.owned.begin() + static_cast<std::ptrdiff_t>(r * out.cols + offset));
          }
          offset += s.cols;
        }
      }
      break;
    }
    case OpKind::Slice: {
      need(1);
      const Shape& s = shape(inputs[0]);
      if (attrs.axis != 0 && attrs.axis != 1) throw std::invalid_argument("slice: axis must be 0 or 1");
      const std::size_t extent = attrs.axis == 0 ? s.rows : s.cols;
      if (attrs.begin >= attrs.end || attrs.end > extent) {
        shape_fail(op, "range [" + std::to_string(attrs.begin) + "," + std::to_string(attrs.end) +
                           ") out of bounds on axis " + std::to_string(attrs.axis),
                   {s});
      }
      const double* src = val(inputs[0].id);
      if (attrs.axis == 0) {
        n.shape = {attrs.end - attrs.begin, s.cols};
        n.owned.assign(src + attrs.begin * s.cols, src + attrs.end * s.cols);
      } else {
        n.shape = {s.rows, attrs.end - attrs.begin};
        n.owned.resize(n.shape.size());
        for (std::size_t r = 0; r < s.rows; ++r) {
          std::copy(src + r * s.cols + attrs.begin, src + r * s.cols + attrs.end,
                    n.owned.begin() + static_cast<std::ptrdiff_t>(r * n.shape.cols));
        }
      }
      break;
    }
    case OpKind::Sum: {
      need(1);
      const Shape& s = shape(inputs[0]);
      const double* src = val(inputs[0].id);
      if (attrs.axis == -1) {
        n.shape = {1, 1};
        double acc = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) acc += src[i];
        n.owned = {acc};
      } else if (attrs.axis == 0) {
        n.shape = {1, s.cols};
        n.owned.assign(s.cols, 0.0);
        for (std::size_t r = 0; r < s.rows; ++r)
          for (std::size_t c = 0; c < s.cols; ++c) n.owned[c] += src[r * s.cols + c];
      } else if (attrs.axis == 1) {
        n.shape = {s.rows, 1};
        n.owned.assign(s.rows, 0.0);
        for (std::size_t r = 0; r < s.rows; ++r)
          for (std::size_t c = 0; c < s.cols; ++c) n.owned[r] += src[r * s.cols + c];
      } else {
        throw std::invalid_argument("sum: axis must be -1, 0 or 1");
      }
      break;
    }
    case OpKind::Max: {
      need(1);
      const Shape& s = shape(inputs[0]);
      if (s.size() == 0) shape_fail(op, "empty input", {s});
      const double* src = val(inputs[0].id);
      if (attrs.axis == 0) {
        n.shape = {1, s.cols};
        n.owned.assign(src, src + s.cols);
        n.index.assign(s.cols, 0);
        for (std::size_t r = 1; r < s.rows; ++r)
          for (std::size_t c = 0; c < s.cols; ++c)
            if (src[r * s.cols + c] > n.owned[c]) {
              n.owned[c] = src[r * s.cols + c];
              n.index[c] = r;
            }
      } else if (attrs.axis == 1) {
        n.shape = {s.rows, 1};
        n.owned.resize(s.rows);
        n.index.assign(s.rows, 0);
        for (std::size_t r = 0; r < s.rows; ++r) {
          n.owned[r] = src[r * s.cols];
          for (std::size_t c = 1; c < s.cols; ++c)
            if (src[r * s.cols + c] > n.owned[r]) {
              n.owned[r] = src[r * s.cols + c];
              n.index[r] = c;
            }
        }
      } else {
        throw std::invalid_argument("max: axis must be 0 or 1");
      }
      break;
    }
    case OpKind::Tanh:
    case OpKind::Sigmoid:
    case OpKind::Elu:
    case OpKind::Log: {
      need(1);
      const Shape& s = shape(inputs[0]);
      const double* src = val(inputs[0].id);
      n.shape = s;
      n.owned.resize(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double x = src[i];
        switch (op) {
          case OpKind::Tanh: n.owned[i] = std::tanh(x); break;
          case OpKind::Sigmoid: n.owned[i] = 1.0 / (1.0 + std::exp(-x)); break;
          case OpKind::Elu: n.owned[i] = x > 0.0 ? x : attrs.alpha * std::expm1(x); break;
          default: n.owned[i] = std::log(x); break;
        }
      }
      break;
    }
    case OpKind::Softmax: {
      need(1);
      const Shape& s = shape(inputs[0]);
      if (attrs.axis != 0 && attrs.axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
      const double* src = val(inputs[0].id);
      n.shape = s;
      n.owned.resize(s.size());
      const std::size_t lines = attrs.axis == 1 ? s.rows : s.cols;
      const std::size_t len = attrs.axis == 1 ? s.cols : s.rows;
      const std::size_t stride = attrs.axis == 1 ? 1 : s.cols;
      for (std::size_t l = 0; l < lines; ++l) {
        const std::size_t base = attrs.axis == 1 ? l * s.cols : l;
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < len; ++i) {
          const double x = src[base + i * stride];
          if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
            throw NumericError("softmax: non-finite input " + std::to_string(x));
          }
          m = std::max(m, x);
        }
        if (!std::isfinite(m)) shape_fail(op, "every entry along the softmax axis is masked", {s});
        double z = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          const double e = std::exp(src[base + i * stride] - m);
          n.owned[base + i * stride] = e;
          z += e;
        }
        for (std::size_t i = 0; i < len; ++i) n.owned[base + i * stride] /= z;
      }
      break;
    }
    case OpKind::Lookup: {
      need(1);
      const Shape& t = shape(inputs[0]);
      const double* src = val(inputs[0].id);
      n.shape = {attrs.ids.size(), t.cols};
      n.owned.assign(n.shape.size(), 0.0);
      for (std::size_t r = 0; r < attrs.ids.size(); ++r) {
        const int id = attrs.ids[r];
        if (id < 0) continue;
        if (static_cast<std::size_t>(id) >= t.rows) {
          shape_fail(op, "row id " + std::to_string(id) + " out of range", {t});
        }
        std::copy(src + static_cast<std::size_t>(id) * t.cols, src + (static_cast<std::size_t>(id) + 1) * t.cols,
                  n.owned.begin() + static_cast<std::ptrdiff_t>(r * t.cols));
      }
      break;
    }
    case OpKind::Conv1d: {
      need(3);
      const Shape& x = shape(inputs[0]);
      const Shape& f = shape(inputs[1]);
      const Shape& b = shape(inputs[2]);
      const std::size_t w = attrs.window;
      if (w == 0 || w % 2 == 0) throw std::invalid_argument("conv1d: window must be odd and positive");
      if (f.rows != w * x.cols) shape_fail(op, "filter rows must equal window * input width", {x, f});
      if (b.rows != 1 || b.cols != f.cols) shape_fail(op, "bias must be 1 x filters", {f, b});
      // im2col with zero padding: row t holds inputs t-w/2 .. t+w/2.
      const std::size_t half = w / 2;
      RowMat unfold = RowMat::Zero(static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(w * x.cols));
      const double* src = val(inputs[0].id);
      for (std::size_t t = 0; t < x.rows; ++t)
        for (std::size_t k = 0; k < w; ++k) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(half);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(x.rows)) continue;
          for (std::size_t c = 0; c < x.cols; ++c)
            unfold(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k * x.cols + c)) =
                src[static_cast<std::size_t>(pos) * x.cols + c];
        }
      n.shape = {x.rows, f.cols};
      n.owned.resize(n.shape.size());
      auto out = mmap(n.owned.data(), n.shape);
      out.noalias() = unfold * cmap(val(inputs[1].id), f);
      out.rowwise() += cmap(val(inputs[2].id), b).row(0);
      break;
    }
    case OpKind::Reshape: {
      need(1);
      const Shape& s = shape(inputs[0]);
      if (attrs.shape.size() != s.size()) shape_fail(op, "element counts differ", {s, attrs.shape});
      n.shape = attrs.shape;
      const double* src = val(inputs[0].id);
      n.owned.assign(src, src + s.size());
      break;
    }
    case OpKind::Leaf:
    default:
      throw std::invalid_argument("apply: unknown or non-applicable op kind " +
                                  std::to_string(static_cast<int>(op)));
  }

  for (std::size_t id : n.inputs) n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  OpAttrs at;
  at.transpose_a = transpose_a;
  at.transpose_b = transpose_b;
  const Var in[] = {a, b};
  return apply(OpKind::MatMul, in, at);
}
Var Graph::add(Var a, Var b) {
  const Var in[] = {a, b};
  return apply(OpKind::Add, in);
}
Var Graph::mul(Var a, Var b) {
  const Var in[] = {a, b};
  return apply(OpKind::Mul, in);
}
Var Graph::concat(std::span<const Var> parts, int axis) {
  OpAttrs at;
  at.axis = axis;
  return apply(OpKind::Concat, parts, at);
}
Var Graph::slice(Var x, int axis, std::size_t begin, std::size_t end) {
  OpAttrs at;
  at.axis = axis;
  at.begin = begin;
  at.end = end;
  const Var in[] = {x};
  return apply(OpKind::Slice, in, at);
}
Var Graph::sum(Var x, int axis) {
  OpAttrs at;
  at.axis = axis;
  const Var in[] = {x};
  return apply(OpKind::Sum, in, at);
}
Var Graph::max(Var x, int axis) {
  OpAttrs at;
  at.axis = axis;
  const Var in[] = {x};
  return apply(OpKind::Max, in, at);
}
Var Graph::tanh(Var x) {
  const Var in[] = {x};
  return apply(OpKind::Tanh, in);
}
Var Graph::sigmoid(Var x) {
  const Var in[] = {x};
  return apply(OpKind::Sigmoid, in);
}
Var Graph::elu(Var x, double alpha) {
  OpAttrs at;
  at.alpha = alpha;
  const Var in[] = {x};
  return apply(OpKind::Elu, in, at);
}
Var Graph::softmax(Var x, int axis) {
  OpAttrs at;
  at.axis = axis;
  const Var in[] = {x};
  return apply(OpKind::Softmax, in, at);
}
Var Graph::log(Var x) {
  const Var in[] = {x};
  return apply(OpKind::Log, in);
}
Var Graph::lookup(Var table, std::vector<int> ids) {
  OpAttrs at;
  at.ids = std::move(ids);
  const Var in[] = {table};
  return apply(OpKind::Lookup, in, at);
}
Var Graph::conv1d(Var input, Var filters, Var bias, std::size_t window) {
  OpAttrs at;
  at.window = window;
  const Var in[] = {input, filters, bias};
  return apply(OpKind::Conv1d, in, at);
}
Var Graph::dropout(Var x, Var mask) {
  const Var in[] = {x, mask};
  return apply(OpKind::DropoutApply, in);
}
Var Graph::reshape(Var x, Shape s) {
  OpAttrs at;
  at.shape = s;
  const Var in[] = {x};
  return apply(OpKind::Reshape, in, at);
}

std::span<const double> Graph::value(Var v) const { return {val(v.id), nodes_[v.id].shape.size()}; }

double Graph::scalar(Var v) const {
  if (nodes_[v.id].shape.size() != 1) throw ShapeError("scalar: node has shape " + to_string(nodes_[v.id].shape));
  return val(v.id)[0];
}

std::span<const double> Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.param != nullptr) return n.param->grad;
  return n.grad;
}

// ---------------------------------------------------------------------------
// Graph: backward

double* Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.param != nullptr) return n.param->grad.data();
  if (n.grad.empty()) n.grad.assign(n.shape.size(), 0.0);
  return n.grad.data();
}

void Graph::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw std::invalid_argument("backward: dangling loss node");
  const Shape& s = nodes_[loss.id].shape;
  if (s.size() != 1) throw ShapeError("backward: loss must be scalar, got " + to_string(s));
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] += 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (n.op == OpKind::Leaf || !n.requires_grad || n.grad.empty()) continue;
    backward_node(id);
  }
}

void Graph::backward_node(std::size_t id) {
  // Copy what we need: grad_buffer() may not reallocate nodes_, but keep
  // references short-lived anyway.
  const Node& n = nodes_[id];
  const double* g = n.grad.data();
  const Shape out = n.shape;
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };

  switch (n.op) {
    case OpKind::MatMul: {
      const std::size_t ia = n.inputs[0], ib = n.inputs[1];
      const Shape sa = nodes_[ia].shape, sb = nodes_[ib].shape;
      auto G = cmap(g, out);
      auto A = cmap(val(ia), sa);
      auto B = cmap(val(ib), sb);
      const bool ta = n.attrs.transpose_a, tb = n.attrs.transpose_b;
      if (wants(0)) {
        auto dA = mmap(grad_buffer(ia), sa);
        if (!ta) {
          if (!tb) dA.noalias() += G * B.transpose();
          else dA.noalias() += G * B;
        } else {
          if (!tb) dA.noalias() += B * G.transpose();
          else dA.noalias() += B.transpose() * G.transpose();
        }
      }
      if (wants(1)) {
        auto dB = mmap(grad_buffer(ib), sb);
        if (!tb) {
          if (!ta) dB.noalias() += A.transpose() * G;
          else dB.noalias() += A * G;
        } else {
          if (!ta) dB.noalias() += G.transpose() * A;
          else dB.noalias() += G.transpose() * A.transpose();
        }
      }
      break;
    }
    case OpKind::Add:
    case OpKind::Mul:
    case OpKind::DropoutApply: {
      const std::size_t ia = n.inputs[0], ib = n.inputs[1];
      const Shape sb = nodes_[ib].shape;
      const bool add = n.op == OpKind::Add;
      const double* x = val(ia);
      const double* y = val(ib);
      double* dx = wants(0) ? grad_buffer(ia) : nullptr;
      double* dy = wants(1) ? grad_buffer(ib) : nullptr;
      for (std::size_t r = 0; r < out.rows; ++r) {
        const std::size_t br = sb.rows == 1 ? 0 : r;
        for (std::size_t c = 0; c < out.cols; ++c) {
          const std::size_t i = r * out.cols + c;
          const std::size_t j = br * sb.cols + (sb.cols == 1 ? 0 : c);
          if (dx != nullptr) dx[i] += add ? g[i] : g[i] * y[j];
          if (dy != nullptr) dy[j] += add ? g[i] : g[i] * x[i];
        }
      }
      break;
    }
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t in = n.inputs[k];
        const Shape s = nodes_[in].shape;
        if (nodes_[in].requires_grad) {
          double* d = grad_buffer(in);
          if (n.attrs.axis == 0) {
            for (std::size_t i = 0; i < s.size(); ++i) d[i] += g[offset * out.cols + i];
          } else {
            for (std::size_t r = 0; r < s.rows; ++r)
              for (std::size_t c = 0; c < s.cols; ++c) d[r * s.cols + c] += g[r * out.cols + offset + c];
          }
        }
        offset += n.attrs.axis == 0 ? s.rows : s.cols;
      }
      break;
    }
    case OpKind::Slice: {
      const std::size_t in = n.inputs[0];
      const Shape s = nodes_[in].shape;
      double* d = grad_buffer(in);
      if (n.attrs.axis == 0) {
        for (std::size_t i = 0; i < out.size(); ++i) d[n.attrs.begin * s.cols + i] += g[i];
      } else {
        for (std::size_t r = 0; r < out.rows; ++r)
          for (std::size_t c = 0; c < out.cols; ++c) d[r * s.cols + n.attrs.begin + c] += g[r * out.cols + c];
      }
      break;
    }
    case OpKind::Sum: {
      const std::size_t in = n.inputs[0];
      const Shape s = nodes_[in].shape;
      double* d = grad_buffer(in);
      for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t c = 0; c < s.cols; ++c) {
          const double gv = n.attrs.axis == -1 ? g[0] : n.attrs.axis == 0 ? g[c] : g[r];
          d[r * s.cols + c] += gv;
        }
      break;
    }
    case OpKind::Max: {
      const std::size_t in = n.inputs[0];
      const Shape s = nodes_[in].shape;
      double* d = grad_buffer(in);
      if (n.attrs.axis == 0) {
        for (std::size_t c = 0; c < s.cols; ++c) d[n.index[c] * s.cols + c] += g[c];
      } else {
        for (std::size_t r = 0; r < s.rows; ++r) d[r * s.cols + n.index[r]] += g[r];
      }
      break;
    }
    case OpKind::Tanh:
    case OpKind::Sigmoid:
    case OpKind::Elu:
    case OpKind::Log: {
      const std::size_t in = n.inputs[0];
      const double* x = val(in);
      const double* y = n.owned.data();
      double* d = grad_buffer(in);
      for (std::size_t i = 0; i < out.size(); ++i) {
        switch (n.op) {
          case OpKind::Tanh: d[i] += g[i] * (1.0 - y[i] * y[i]); break;
          case OpKind::Sigmoid: d[i] += g[i] * y[i] * (1.0 - y[i]); break;
          case OpKind::Elu: d[i] += g[i] * (x[i] > 0.0 ? 1.0 : y[i] + n.attrs.alpha); break;
          default: d[i] += g[i] / x[i]; break;
        }
      }
      break;
    }
    case OpKind::Softmax: {
      const std::size_t in = n.inputs[0];
      const double* y = n.owned.data();
      double* d = grad_buffer(in);
      const bool rows = n.attrs.axis == 1;
      const std::size_t lines = rows ? out.rows : out.cols;
      const std::size_t len = rows ? out.cols : out.rows;
      const std::size_t stride = rows ? 1 : out.cols;
      for (std::size_t l = 0; l < lines; ++l) {
        const std::size_t base = rows ? l * out.cols : l;
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += y[base + i * stride] * g[base + i * stride];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t k = base + i * stride;
          d[k] += y[k] * (g[k] - dot);
        }
      }
      break;
    }
    case OpKind::Lookup: {
      const std::size_t in = n.inputs[0];
      const Shape s = nodes_[in].shape;
      double* d = grad_buffer(in);
      for (std::size_t r = 0; r < n.attrs.ids.size(); ++r) {
        const int id = n.attrs.ids[r];
        if (id < 0) continue;
        double* row = d + static_cast<std::size_t>(id) * s.cols;
        for (std::size_t c = 0; c < s.cols; ++c) row[c] += g[r * s.cols + c];
      }
      break;
    }
    case OpKind::Conv1d: {
      const std::size_t ix = n.inputs[0], iff = n.inputs[1], ibias = n.inputs[2];
      const Shape sx = nodes_[ix].shape, sf = nodes_[iff].shape;
      const std::size_t w = n.attrs.window, half = w / 2;
      auto G = cmap(g, out);
      RowMat unfold = RowMat::Zero(static_cast<Eigen::Index>(sx.rows), static_cast<Eigen::Index>(w * sx.cols));
      const double* src = val(ix);
      auto position = [&](std::size_t t, std::size_t k) {
        return static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(half);
      };
      for (std::size_t t = 0; t < sx.rows; ++t)
        for (std::size_t k = 0; k < w; ++k) {
          const std::ptrdiff_t pos = position(t, k);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(sx.rows)) continue;
          for (std::size_t c = 0; c < sx.cols; ++c)
            unfold(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k * sx.cols + c)) =
                src[static_cast<std::size_t>(pos) * sx.cols + c];
        }
      if (wants(1)) mmap(grad_buffer(iff), sf).noalias() += unfold.transpose() * G;
      if (wants(2)) {
        double* db = grad_buffer(ibias);
        for (std::size_t t = 0; t < out.rows; ++t)
          for (std::size_t c = 0; c < out.cols; ++c) db[c] += g[t * out.cols + c];
      }
      if (wants(0)) {
        RowMat dunfold = G * cmap(val(iff), sf).transpose();
        double* dx = grad_buffer(ix);
        for (std::size_t t = 0; t < sx.rows; ++t)
          for (std::size_t k = 0; k < w; ++k) {
            const std::ptrdiff_t pos = position(t, k);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(sx.rows)) continue;
            for (std::size_t c = 0; c < sx.cols; ++c)
              dx[static_cast<std::size_t>(pos) * sx.cols + c] +=
                  dunfold(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k * sx.cols + c));
          }
      }
      break;
    }
    case OpKind::Reshape: {
      const std::size_t in = n.inputs[0];
      double* d = grad_buffer(in);
      for (std::size_t i = 0; i < out.size(); ++i) d[i] += g[i];
      break;
    }
    case OpKind::Leaf:
      break;
  }
}

}  // namespace stackptr::ag
