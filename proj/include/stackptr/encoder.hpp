#pragma once

// Building blocks shared by both parsers: parameter initialisation, LSTM
// cells, and the BLSTM-CNN sentence encoder.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stackptr/autograd.hpp"
#include "stackptr/config.hpp"
#include "stackptr/vocab.hpp"

namespace stackptr::nn {

using ag::Graph;
using ag::Parameter;
using ag::ParameterSet;
using ag::Shape;
using ag::Var;

enum class Mode { train, eval };

/// Seeded initialiser; parameters are initialised in creation order.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  /// U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
  void glorot(Parameter& p);
  void uniform(Parameter& p, double bound);

 private:
  double next() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
};

/// x W + b.
Var affine(Graph& g, Var x, Parameter& w, Parameter& b);

/// Gate layout along columns: input, forget, candidate, output.
struct LstmParams {
  Parameter* wx = nullptr;  // in x 4H
  Parameter* wh = nullptr;  // H x 4H
  Parameter* b = nullptr;   // 1 x 4H
  std::size_t input = 0;
  std::size_t hidden = 0;

  static LstmParams build(ParameterSet& ps, Initializer& init, const std::string& prefix, std::size_t input,
                          std::size_t hidden);
};

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM step on m independent rows: x is m x in, states m x H.
LstmState lstm_cell(Graph& g, Var x, Var h_prev, Var c_prev, const LstmParams& p);
/// Same step when x W_x + b has already been computed (m x 4H).
LstmState lstm_cell_projected(Graph& g, Var x_proj, Var h_prev, Var c_prev, const LstmParams& p);

/// Runs an LSTM over the rows of `inputs` (T x in) and returns T x H outputs
/// in input order. `recurrent_mask`, when non-null, multiplies h_{t-1} at
/// every step.
Var run_lstm(Graph& g, Var inputs, const LstmParams& p, bool reverse, const Var* recurrent_mask = nullptr);

struct EncoderParams {
  Parameter* word_emb = nullptr;
  Parameter* char_emb = nullptr;
  Parameter* pos_emb = nullptr;  // null when pos_mode is none
  Parameter* conv_w = nullptr;
  Parameter* conv_b = nullptr;
  std::vector<LstmParams> forward;
  std::vector<LstmParams> backward;
  std::size_t window = 3;
  std::size_t hidden = 0;

  static EncoderParams build(ParameterSet& ps, Initializer& init, const ModelConfig& config,
                             const Vocabulary& vocab, const std::string& prefix = "enc");
  std::size_t output_dim() const { return 2 * hidden; }
};

struct DropoutRates {
  double embedding = 0.0;
  double recurrent = 0.0;
  double layer = 0.0;

  static DropoutRates from(const ModelConfig& c) { return {c.dropout_embedding, c.dropout_recurrent, c.dropout_layer}; }
};

/// Window convolution over a word's character embeddings with zero padding,
/// then a max over positions: 1 x filters.
Var char_encode(Graph& g, const std::vector<int>& chars, const EncoderParams& p);

/// (n+1) x 2H states; row 0 is the virtual root.
Var encode(Graph& g, const EncodedSentence& s, const EncoderParams& p, const DropoutRates& rates, Mode mode);

}  // namespace stackptr::nn
