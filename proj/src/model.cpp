#include "stackptr/model.hpp"

#include <cmath>
#include <limits>

#include "stackptr/biaffine_baseline.hpp"
#include "stackptr/error.hpp"
#include "stackptr/stackptr_model.hpp"

namespace stackptr {

using ag::Graph;
using ag::Shape;
using ag::Var;

GoldTree encode_tree(const Vocabulary& vocab, const DependencyTree& tree) {
  GoldTree gold;
  gold.heads = tree.heads;
  gold.labels.assign(tree.labels.size(), -1);
  for (std::size_t i = 1; i < tree.labels.size(); ++i) gold.labels[i] = vocab.labels.id(tree.labels[i]);
  return gold;
}

LabelBiaffine LabelBiaffine::build(ag::ParameterSet& ps, nn::Initializer& init, const std::string& prefix,
                                   std::size_t in_head, std::size_t in_child, std::size_t dim, std::size_t labels) {
  if (labels == 0) throw ShapeError("label classifier needs at least one label");
  LabelBiaffine p;
  p.dim = dim;
  p.labels = labels;
  p.head_w = &ps.add(prefix + ".head_w", {in_head, dim});
  p.head_b = &ps.add(prefix + ".head_b", {1, dim});
  p.child_w = &ps.add(prefix + ".child_w", {in_child, dim});
  p.child_b = &ps.add(prefix + ".child_b", {1, dim});
  p.w = &ps.add(prefix + ".w", {dim, labels * dim});
  p.u = &ps.add(prefix + ".u", {dim, labels});
  p.v = &ps.add(prefix + ".v", {dim, labels});
  p.b = &ps.add(prefix + ".b", {1, labels});
  init.glorot(*p.head_w);
  init.glorot(*p.child_w);
  init.glorot(*p.w);
  init.glorot(*p.u);
  init.glorot(*p.v);
  return p;
}

Var LabelBiaffine::project_head(Graph& g, Var rows) const { return g.elu(nn::affine(g, rows, *head_w, *head_b)); }

Var LabelBiaffine::project_child(Graph& g, Var rows) const {
  return g.elu(nn::affine(g, rows, *child_w, *child_b));
}

Var LabelBiaffine::scores(Graph& g, Var heads, Var children) const {
  const std::size_t m = g.shape(heads).rows;
  if (g.shape(children).rows != m) {
    throw ShapeError("label scores: " + ag::to_string(g.shape(heads)) + " heads vs " +
                     ag::to_string(g.shape(children)) + " children");
  }
  const std::size_t K = labels, L = dim;
  // Row r of heads x W holds h_r^T W_k for every label k; reshaped it lines
  // up with child row r repeated K times.
  Var bil = g.reshape(g.matmul(heads, g.parameter(*w)), {m * K, L});
  std::vector<int> repeat(m * K);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t k = 0; k < K; ++k) repeat[r * K + k] = static_cast<int>(r);
  Var bilinear = g.reshape(g.sum(g.mul(bil, g.lookup(children, std::move(repeat))), 1), {m, K});
  Var linear = g.add(g.matmul(heads, g.parameter(*u)), g.matmul(children, g.parameter(*v)));
  return g.add(g.add(bilinear, linear), g.parameter(*b));
}

Var mask_constant(Graph& g, Shape shape, const std::vector<bool>& allowed) {
  if (allowed.size() != shape.size()) throw ShapeError("mask size does not match " + ag::to_string(shape));
  std::vector<double> m(shape.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = allowed[i] ? 0.0 : -std::numeric_limits<double>::infinity();
  return g.constant(shape, std::move(m));
}

Var masked_nll(Graph& g, Var scores, const std::vector<bool>& allowed, const std::vector<int>& targets, int axis) {
  const Shape s = g.shape(scores);
  Var x = allowed.empty() ? scores : g.add(scores, mask_constant(g, s, allowed));
  Var p = g.softmax(x, axis);
  const std::size_t lines = axis == 1 ? s.rows : s.cols;
  if (targets.size() != lines) throw ShapeError("masked_nll: one target per line required");
  std::vector<double> onehot(s.size(), 0.0);
  for (std::size_t l = 0; l < lines; ++l) {
    const auto t = static_cast<std::size_t>(targets[l]);
    const std::size_t idx = axis == 1 ? l * s.cols + t : t * s.cols + l;
    if (!allowed.empty() && !allowed[idx]) throw InvariantError("masked_nll: gold target is masked");
    onehot[idx] = 1.0;
  }
  // -log p_gold = m - x_gold - log p_max, where m is the line maximum. p_max
  // is at least 1/width, so the log stays finite however peaked the scores.
  // The gold score is read from the unmasked scores (a masked -inf times a
  // zero one-hot entry would be NaN).
  Var m = g.sum(g.max(x, axis));
  Var gold = g.sum(g.mul(scores, g.constant(s, std::move(onehot))));
  Var log_pmax = g.sum(g.log(g.max(p, axis)));
  Var minus_one = g.constant({1, 1}, {-1.0});
  return g.add(m, g.mul(g.add(gold, log_pmax), minus_one));
}

Var label_nll(Graph& g, Var scores, const std::vector<int>& gold) { return masked_nll(g, scores, {}, gold, 1); }

void Model::set_word_embeddings(const EmbeddingTable& table) {
  ag::Parameter& emb = *encoder().word_emb;
  if (table.dim != emb.shape.cols || table.rows.size() != emb.value.size()) {
    throw ShapeError("embedding table " + std::to_string(table.rows.size() / std::max<std::size_t>(table.dim, 1)) +
                     "x" + std::to_string(table.dim) + " does not match " + ag::to_string(emb.shape));
  }
  std::copy(table.rows.begin(), table.rows.end(), emb.value.begin());
  std::fill(emb.value.begin(), emb.value.begin() + static_cast<std::ptrdiff_t>(emb.shape.cols), 0.0);
}

std::unique_ptr<Model> make_model(ModelKind kind, const ModelConfig& config, const Vocabulary& vocab) {
  if (kind == ModelKind::stackptr) return std::make_unique<StackPointerModel>(config, vocab);
  return std::make_unique<BiaffineModel>(config, vocab);
}

}  // namespace stackptr
