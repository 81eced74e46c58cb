#include "stackptr/stackptr_model.hpp"

#include <cmath>
#include <limits>

#include "stackptr/error.hpp"
#include "stackptr/inference.hpp"

namespace stackptr {

using ag::Graph;
using ag::Var;

ArcBiaffine ArcBiaffine::build(ag::ParameterSet& ps, nn::Initializer& init, const std::string& prefix,
                               std::size_t in_head, std::size_t in_child, std::size_t dim) {
  ArcBiaffine p;
  p.head_w = &ps.add(prefix + ".head_w", {in_head, dim});
  p.head_b = &ps.add(prefix + ".head_b", {1, dim});
  p.child_w = &ps.add(prefix + ".child_w", {in_child, dim});
  p.child_b = &ps.add(prefix + ".child_b", {1, dim});
  p.w = &ps.add(prefix + ".w", {dim, dim});
  p.u = &ps.add(prefix + ".u", {1, dim});
  p.v = &ps.add(prefix + ".v", {1, dim});
  p.b = &ps.add(prefix + ".b", {1, 1});
  init.glorot(*p.head_w);
  init.glorot(*p.child_w);
  init.glorot(*p.w);
  init.glorot(*p.u);
  init.glorot(*p.v);
  return p;
}

Var ArcBiaffine::project_head(Graph& g, Var rows) const { return g.elu(nn::affine(g, rows, *head_w, *head_b)); }

Var ArcBiaffine::project_child(Graph& g, Var rows) const { return g.elu(nn::affine(g, rows, *child_w, *child_b)); }

Var ArcBiaffine::scores(Graph& g, Var heads, Var children) const {
  // (h W + V) s_i^T covers the bilinear and child-linear terms in one product.
  Var q = g.add(g.matmul(heads, g.parameter(*w)), g.parameter(*v));
  Var bil = g.matmul(q, children, false, true);
  Var head_term = g.matmul(heads, g.parameter(*u), false, true);
  return g.add(g.add(bil, head_term), g.parameter(*b));
}

Var compose_input(Graph& g, Var encoder_states, const std::vector<StepContext>& contexts, Variant variant) {
  std::vector<int> h, gp, sib;
  h.reserve(contexts.size());
  for (const StepContext& c : contexts) {
    h.push_back(c.head);
    gp.push_back(c.grandparent);
    sib.push_back(c.sibling);
  }
  Var beta = g.lookup(encoder_states, std::move(h));
  if (uses_grandparent(variant)) beta = g.add(beta, g.lookup(encoder_states, std::move(gp)));
  if (uses_sibling(variant)) beta = g.add(beta, g.lookup(encoder_states, std::move(sib)));
  return beta;
}

StackPointerModel::StackPointerModel(const ModelConfig& config, const Vocabulary& vocab) : Model(config, vocab) {
  nn::Initializer init(config_.seed);
  encoder_ = nn::EncoderParams::build(params_, init, config_, vocab_);
  const std::size_t enc = encoder_.output_dim();
  std::size_t input = enc;
  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    decoder_.push_back(nn::LstmParams::build(params_, init, "dec.lstm" + std::to_string(l), input,
                                             config_.decoder_hidden));
    input = config_.decoder_hidden;
  }
  arc_ = ArcBiaffine::build(params_, init, "arc", config_.decoder_hidden, enc, config_.arc_mlp);
  label_ = LabelBiaffine::build(params_, init, "label", config_.decoder_hidden, enc, config_.label_mlp,
                                vocab_.labels.size());
}

SentenceCache StackPointerModel::prepare(Graph& g, const EncodedSentence& s, nn::Mode mode) const {
  SentenceCache c;
  c.states = nn::encode(g, s, encoder_, nn::DropoutRates::from(config_), mode);
  c.arc_child = arc_.project_child(g, c.states);
  c.label_child = label_.project_child(g, c.states);
  return c;
}

Var StackPointerModel::run_decoder(Graph& g, Var inputs) const {
  Var x = inputs;
  for (const auto& layer : decoder_) x = nn::run_lstm(g, x, layer, false);
  return x;
}

Var StackPointerModel::arc_scores(Graph& g, Var decoder_out, const SentenceCache& cache) const {
  return arc_.scores(g, arc_.project_head(g, decoder_out), cache.arc_child);
}

Var StackPointerModel::label_scores(Graph& g, Var decoder_rows, const SentenceCache& cache,
                                    const std::vector<int>& children) const {
  return label_.scores(g, label_.project_head(g, decoder_rows), g.lookup(cache.label_child, children));
}

namespace {

struct TeacherForced {
  std::vector<StepContext> contexts;
  std::vector<bool> allowed;  // steps x (n+1)
  std::vector<int> targets;
};

TeacherForced teacher_force(const std::vector<DecodeAction>& actions, std::size_t n, bool single_root) {
  TeacherForced tf;
  tf.contexts.reserve(actions.size());
  tf.allowed.reserve(actions.size() * (n + 1));
  ParserState state(n);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (state.done()) throw DataError("action " + std::to_string(i) + " follows the final pop");
    tf.contexts.push_back(state.context());
    for (std::size_t c = 0; c <= n; ++c) tf.allowed.push_back(state.is_legal(static_cast<int>(c), single_root));
    const int target = actions[i].is_pop() ? state.top() : actions[i].child;
    tf.targets.push_back(target);
    state.apply(target, single_root);
  }
  return tf;
}

}  // namespace

Var StackPointerModel::sequence_log_prob(Graph& g, const SentenceCache& cache,
                                         const std::vector<DecodeAction>& actions, bool single_root) const {
  const std::size_t n = g.shape(cache.states).rows - 1;
  TeacherForced tf = teacher_force(actions, n, single_root);
  Var beta = compose_input(g, cache.states, tf.contexts, config_.variant);
  Var e = arc_scores(g, run_decoder(g, beta), cache);
  return g.mul(masked_nll(g, e, tf.allowed, tf.targets, 1), g.constant({1, 1}, {-1.0}));
}

double StackPointerModel::sequence_log_prob(const EncodedSentence& s, const std::vector<DecodeAction>& actions,
                                            bool single_root) const {
  Graph g;
  SentenceCache cache = prepare(g, s, nn::Mode::eval);
  return g.scalar(sequence_log_prob(g, cache, actions, single_root));
}

Var StackPointerModel::loss(Graph& g, const EncodedSentence& s, const GoldTree& gold, nn::Mode mode) const {
  if (auto v = validate(gold.heads)) {
    throw DataError("loss: invalid gold tree at word " + std::to_string(v->index) + ": " + v->message);
  }
  if (gold.heads.size() != s.words.size()) throw DataError("loss: tree and sentence lengths differ");
  const std::size_t n = s.size();
  SentenceCache cache = prepare(g, s, mode);
  OracleSequence seq = oracle(gold.heads, config_.child_order);
  TeacherForced tf = teacher_force(seq.actions, n, false);

  Var beta = compose_input(g, cache.states, tf.contexts, config_.variant);
  Var dec = run_decoder(g, beta);
  Var arc_nll = masked_nll(g, arc_scores(g, dec, cache), tf.allowed, tf.targets, 1);

  // Label loss at every arc-creating step; pops create no arc.
  std::vector<int> rows, children, labels;
  for (std::size_t t = 0; t < seq.actions.size(); ++t) {
    if (seq.actions[t].is_pop()) continue;
    const int c = seq.actions[t].child;
    rows.push_back(static_cast<int>(t));
    children.push_back(c);
    const int label = gold.labels[static_cast<std::size_t>(c)];
    if (label < 0) throw DataError("loss: word " + std::to_string(c) + " has a label unknown to the vocabulary");
    labels.push_back(label);
  }
  Var label_loss = label_nll(g, label_scores(g, g.lookup(dec, rows), cache, children), labels);
  return g.add(arc_nll, label_loss);
}

AttentionResult StackPointerModel::attend(std::span<const double> scores, const std::vector<int>& legal) {
  if (legal.empty()) throw InvariantError("attention over an empty legal set");
  AttentionResult r;
  r.scores.assign(scores.begin(), scores.end());
  r.probs.assign(scores.size(), 0.0);
  double m = -std::numeric_limits<double>::infinity();
  for (int i : legal) m = std::max(m, scores[static_cast<std::size_t>(i)]);
  double z = 0.0;
  for (int i : legal) {
    const double e = std::exp(scores[static_cast<std::size_t>(i)] - m);
    r.probs[static_cast<std::size_t>(i)] = e;
    z += e;
  }
  for (int i : legal) r.probs[static_cast<std::size_t>(i)] /= z;
  return r;
}

ParseResult StackPointerModel::parse(const EncodedSentence& s, const DecodeOptions& options) const {
  return decode(*this, s, options);
}

}  // namespace stackptr
