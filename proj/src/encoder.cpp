#include "stackptr/encoder.hpp"

#include <cmath>

#include "stackptr/error.hpp"

namespace stackptr::nn {

void Initializer::glorot(Parameter& p) {
  const double bound = std::sqrt(6.0 / static_cast<double>(p.shape.rows + p.shape.cols));
  uniform(p, bound);
}

void Initializer::uniform(Parameter& p, double bound) {
  for (double& x : p.value) x = -bound + 2.0 * bound * next();
  if (p.padding_row) std::fill(p.value.begin(), p.value.begin() + static_cast<std::ptrdiff_t>(p.shape.cols), 0.0);
}

Var affine(Graph& g, Var x, Parameter& w, Parameter& b) {
  return g.add(g.matmul(x, g.parameter(w)), g.parameter(b));
}

LstmParams LstmParams::build(ParameterSet& ps, Initializer& init, const std::string& prefix, std::size_t input,
                             std::size_t hidden) {
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  p.wx = &ps.add(prefix + ".wx", {input, 4 * hidden});
  p.wh = &ps.add(prefix + ".wh", {hidden, 4 * hidden});
  p.b = &ps.add(prefix + ".b", {1, 4 * hidden});
  init.glorot(*p.wx);
  init.glorot(*p.wh);
  return p;
}

LstmState lstm_cell_projected(Graph& g, Var x_proj, Var h_prev, Var c_prev, const LstmParams& p) {
  const std::size_t H = p.hidden;
  const std::size_t m = g.shape(x_proj).rows;
  if (g.shape(x_proj) != Shape{m, 4 * H} || g.shape(h_prev) != Shape{m, H} || g.shape(c_prev) != Shape{m, H}) {
    throw ShapeError("lstm_cell: expected projected input [mx" + std::to_string(4 * H) + "] and state [mx" +
                     std::to_string(H) + "], got " + ag::to_string(g.shape(x_proj)) + ", " +
                     ag::to_string(g.shape(h_prev)) + ", " + ag::to_string(g.shape(c_prev)));
  }
  Var gates = g.add(x_proj, g.matmul(h_prev, g.parameter(*p.wh)));
  Var i = g.sigmoid(g.slice(gates, 1, 0, H));
  Var f = g.sigmoid(g.slice(gates, 1, H, 2 * H));
  Var cand = g.tanh(g.slice(gates, 1, 2 * H, 3 * H));
  Var o = g.sigmoid(g.slice(gates, 1, 3 * H, 4 * H));
  Var c = g.add(g.mul(f, c_prev), g.mul(i, cand));
  Var h = g.mul(o, g.tanh(c));
  return {h, c};
}

LstmState lstm_cell(Graph& g, Var x, Var h_prev, Var c_prev, const LstmParams& p) {
  if (g.shape(x).cols != p.input) {
    throw ShapeError("lstm_cell: input " + ag::to_string(g.shape(x)) + " does not match [mx" +
                     std::to_string(p.input) + "]");
  }
  return lstm_cell_projected(g, affine(g, x, *p.wx, *p.b), h_prev, c_prev, p);
}

Var run_lstm(Graph& g, Var inputs, const LstmParams& p, bool reverse, const Var* recurrent_mask) {
  const std::size_t T = g.shape(inputs).rows;
  if (g.shape(inputs).cols != p.input) {
    throw ShapeError("run_lstm: input width " + std::to_string(g.shape(inputs).cols) + " does not match " +
                     std::to_string(p.input));
  }
  Var proj = affine(g, inputs, *p.wx, *p.b);
  Var h = g.constant({1, p.hidden}, std::vector<double>(p.hidden, 0.0));
  Var c = h;
  std::vector<Var> out(T);
  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = reverse ? T - 1 - k : k;
    Var h_in = recurrent_mask != nullptr ? g.dropout(h, *recurrent_mask) : h;
    LstmState s = lstm_cell_projected(g, g.slice(proj, 0, t, t + 1), h_in, c, p);
    h = s.h;
    c = s.c;
    out[t] = h;
  }
  return g.concat(out, 0);
}

EncoderParams EncoderParams::build(ParameterSet& ps, Initializer& init, const ModelConfig& config,
                                   const Vocabulary& vocab, const std::string& prefix) {
  check_config(config);
  EncoderParams p;
  p.window = config.cnn_window;
  p.hidden = config.encoder_hidden;
  p.word_emb = &ps.add(prefix + ".word_emb", {vocab.words.size(), config.word_dim}, true);
  p.char_emb = &ps.add(prefix + ".char_emb", {vocab.chars.size(), config.char_dim}, true);
  init.uniform(*p.word_emb, 0.1);
  init.uniform(*p.char_emb, 0.1);
  std::size_t input = config.word_dim + config.cnn_filters;
  if (config.pos_mode != PosMode::none) {
    p.pos_emb = &ps.add(prefix + ".pos_emb", {vocab.pos.size(), config.pos_dim}, true);
    init.uniform(*p.pos_emb, 0.1);
    input += config.pos_dim;
  }
  p.conv_w = &ps.add(prefix + ".conv_w", {config.cnn_window * config.char_dim, config.cnn_filters});
  p.conv_b = &ps.add(prefix + ".conv_b", {1, config.cnn_filters});
  init.glorot(*p.conv_w);
  for (std::size_t l = 0; l < config.encoder_layers; ++l) {
    const std::string name = prefix + ".lstm" + std::to_string(l);
    p.forward.push_back(LstmParams::build(ps, init, name + ".fwd", input, p.hidden));
    p.backward.push_back(LstmParams::build(ps, init, name + ".bwd", input, p.hidden));
    input = 2 * p.hidden;
  }
  return p;
}

Var char_encode(Graph& g, const std::vector<int>& chars, const EncoderParams& p) {
  Var emb = g.lookup(g.parameter(*p.char_emb), chars);
  Var conv = g.conv1d(emb, g.parameter(*p.conv_w), g.parameter(*p.conv_b), p.window);
  return g.max(conv, 0);
}

Var encode(Graph& g, const EncodedSentence& s, const EncoderParams& p, const DropoutRates& rates, Mode mode) {
  const std::size_t rows = s.words.size();
  const bool train = mode == Mode::train;
  auto token_dropout = [&](Var x) {
    if (!train || rates.embedding <= 0.0) return x;
    return g.dropout(x, g.dropout_mask({rows, 1}, rates.embedding));
  };

  std::vector<Var> streams;
  streams.push_back(token_dropout(g.lookup(g.parameter(*p.word_emb), s.words)));

  const std::size_t filters = p.conv_b->shape.cols;
  std::vector<Var> char_rows;
  char_rows.reserve(rows);
  char_rows.push_back(g.constant({1, filters}, std::vector<double>(filters, 0.0)));
  for (std::size_t i = 1; i < rows; ++i) char_rows.push_back(char_encode(g, s.chars[i], p));
  streams.push_back(token_dropout(g.concat(char_rows, 0)));

  if (p.pos_emb != nullptr) streams.push_back(token_dropout(g.lookup(g.parameter(*p.pos_emb), s.pos)));

  Var x = g.concat(streams, 1);
  for (std::size_t l = 0; l < p.forward.size(); ++l) {
    Var fwd, bwd;
    if (train && rates.recurrent > 0.0) {
      Var mf = g.dropout_mask({1, p.hidden}, rates.recurrent);
      Var mb = g.dropout_mask({1, p.hidden}, rates.recurrent);
      fwd = run_lstm(g, x, p.forward[l], false, &mf);
      bwd = run_lstm(g, x, p.backward[l], true, &mb);
    } else {
      fwd = run_lstm(g, x, p.forward[l], false);
      bwd = run_lstm(g, x, p.backward[l], true);
    }
    x = g.concat({fwd, bwd}, 1);
    if (train && rates.layer > 0.0 && l + 1 < p.forward.size()) {
      x = g.dropout(x, g.dropout_mask({1, 2 * p.hidden}, rates.layer));
    }
  }
  return x;
}

}  // namespace stackptr::nn
