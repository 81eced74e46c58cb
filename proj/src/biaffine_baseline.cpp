#include "stackptr/biaffine_baseline.hpp"

#include <algorithm>
#include <limits>

#include "stackptr/error.hpp"
#include "stackptr/mst.hpp"

namespace stackptr {

using ag::Graph;
using ag::Var;

BiaffineModel::BiaffineModel(const ModelConfig& config, const Vocabulary& vocab) : Model(config, vocab) {
  nn::Initializer init(config_.seed);
  encoder_ = nn::EncoderParams::build(params_, init, config_, vocab_);
  const std::size_t enc = encoder_.output_dim();
  arc_ = ArcBiaffine::build(params_, init, "arc", enc, enc, config_.arc_mlp);
  label_ = LabelBiaffine::build(params_, init, "label", enc, enc, config_.label_mlp, vocab_.labels.size());
}

Var BiaffineModel::arc_scores(Graph& g, Var states) const {
  return arc_.scores(g, arc_.project_head(g, states), arc_.project_child(g, states));
}

Var BiaffineModel::loss(Graph& g, const EncodedSentence& s, const GoldTree& gold, nn::Mode mode) const {
  if (auto v = validate(gold.heads)) {
    throw DataError("loss: invalid gold tree at word " + std::to_string(v->index) + ": " + v->message);
  }
  if (gold.heads.size() != s.words.size()) throw DataError("loss: tree and sentence lengths differ");
  const std::size_t n = s.size();
  Var states = nn::encode(g, s, encoder_, nn::DropoutRates::from(config_), mode);
  // Columns are children 1..n; each column is a distribution over heads.
  Var scores = g.slice(arc_scores(g, states), 1, 1, n + 1);
  std::vector<bool> allowed((n + 1) * n, true);
  std::vector<int> heads, children, labels;
  for (std::size_t c = 1; c <= n; ++c) {
    allowed[c * n + (c - 1)] = false;
    heads.push_back(gold.heads[c]);
    children.push_back(static_cast<int>(c));
    const int label = gold.labels[c];
    if (label < 0) throw DataError("loss: word " + std::to_string(c) + " has a label unknown to the vocabulary");
    labels.push_back(label);
  }
  Var arc_nll = masked_nll(g, scores, allowed, heads, 0);
  Var label_heads = g.lookup(label_.project_head(g, states), heads);
  Var label_children = g.lookup(label_.project_child(g, states), children);
  return g.add(arc_nll, label_nll(g, label_.scores(g, label_heads, label_children), labels));
}

ArcScoreMatrix BiaffineModel::score_all(const EncodedSentence& s, bool with_labels) const {
  Graph g;
  Var states = nn::encode(g, s, encoder_, nn::DropoutRates::from(config_), nn::Mode::eval);
  Var arcs = arc_scores(g, states);
  const std::size_t N = s.size() + 1;
  ArcScoreMatrix out;
  out.n = s.size();
  auto values = g.value(arcs);
  out.arcs.assign(N, std::vector<double>(N));
  for (std::size_t h = 0; h < N; ++h) {
    for (std::size_t c = 0; c < N; ++c) {
      out.arcs[h][c] = (c == 0 || c == h) ? -std::numeric_limits<double>::infinity() : values[h * N + c];
    }
  }
  if (with_labels) {
    std::vector<int> hs, cs;
    for (std::size_t h = 0; h < N; ++h) {
      for (std::size_t c = 0; c < N; ++c) {
        hs.push_back(static_cast<int>(h));
        cs.push_back(static_cast<int>(c));
      }
    }
    Var ls = label_.scores(g, g.lookup(label_.project_head(g, states), hs),
                           g.lookup(label_.project_child(g, states), cs));
    out.label_count = g.shape(ls).cols;
    auto lv = g.value(ls);
    out.labels.assign(lv.begin(), lv.end());
  }
  return out;
}

ParseResult BiaffineModel::parse(const EncodedSentence& s, const DecodeOptions& options) const {
  Graph g;
  Var states = nn::encode(g, s, encoder_, nn::DropoutRates::from(config_), nn::Mode::eval);
  Var arcs = arc_scores(g, states);
  const std::size_t N = s.size() + 1;
  auto values = g.value(arcs);
  std::vector<std::vector<double>> matrix(N, std::vector<double>(N));
  for (std::size_t h = 0; h < N; ++h) {
    for (std::size_t c = 0; c < N; ++c) matrix[h][c] = values[h * N + c];
  }
  ParseResult result;
  result.heads = mst_decode(matrix, options.single_root);
  result.log_prob = tree_score(matrix, result.heads);
  result.labels.assign(N, -1);
  if (N > 1) {
    std::vector<int> hs(result.heads.begin() + 1, result.heads.end()), cs;
    for (std::size_t c = 1; c < N; ++c) cs.push_back(static_cast<int>(c));
    Var ls = label_.scores(g, g.lookup(label_.project_head(g, states), hs),
                           g.lookup(label_.project_child(g, states), cs));
    const std::size_t K = g.shape(ls).cols;
    auto lv = g.value(ls);
    for (std::size_t r = 0; r + 1 < N; ++r) {
      const double* row = lv.data() + r * K;
      result.labels[r + 1] = static_cast<int>(std::max_element(row, row + K) - row);
    }
  }
  if (auto v = validate(result.heads)) {
    throw InvariantError("MST produced an invalid tree at word " + std::to_string(v->index) + ": " + v->message);
  }
  return result;
}

}  // namespace stackptr
