#pragma once

// Stack-pointer decoder: higher-order input composition, a unidirectional
// LSTM over stack tops, biaffine pointer attention, and the label classifier.

#include <vector>

#include "stackptr/model.hpp"

namespace stackptr {

/// Biaffine pointer scorer over MLP(elu) projections:
/// e_i = h^T W s_i + U^T h + V^T s_i + b.
struct ArcBiaffine {
  ag::Parameter* head_w = nullptr;
  ag::Parameter* head_b = nullptr;
  ag::Parameter* child_w = nullptr;
  ag::Parameter* child_b = nullptr;
  ag::Parameter* w = nullptr;  // A x A
  ag::Parameter* u = nullptr;  // 1 x A
  ag::Parameter* v = nullptr;  // 1 x A
  ag::Parameter* b = nullptr;  // 1 x 1

  static ArcBiaffine build(ag::ParameterSet& ps, nn::Initializer& init, const std::string& prefix,
                           std::size_t in_head, std::size_t in_child, std::size_t dim);

  ag::Var project_head(ag::Graph& g, ag::Var rows) const;
  ag::Var project_child(ag::Graph& g, ag::Var rows) const;
  /// rows(heads) x rows(children) raw scores from projected inputs.
  ag::Var scores(ag::Graph& g, ag::Var heads, ag::Var children) const;
};

/// beta_t = s_h + s_g + s_s with zero rows for absent or disabled terms.
/// One output row per context.
ag::Var compose_input(ag::Graph& g, ag::Var encoder_states, const std::vector<StepContext>& contexts,
                      Variant variant);

/// Encoder outputs and per-position projections, computed once per sentence.
struct SentenceCache {
  ag::Var states;       // (n+1) x 2H
  ag::Var arc_child;    // (n+1) x A
  ag::Var label_child;  // (n+1) x L
};

struct AttentionResult {
  std::vector<double> scores;  // e over positions 0..n
  std::vector<double> probs;   // masked softmax; exactly 0 where masked
};

class StackPointerModel final : public Model {
 public:
  StackPointerModel(const ModelConfig& config, const Vocabulary& vocab);

  ModelKind kind() const override { return ModelKind::stackptr; }
  ag::Var loss(ag::Graph& g, const EncodedSentence& s, const GoldTree& gold, nn::Mode mode) const override;
  ParseResult parse(const EncodedSentence& s, const DecodeOptions& options) const override;

  SentenceCache prepare(ag::Graph& g, const EncodedSentence& s, nn::Mode mode) const;

  /// Runs the decoder LSTM over rows of `inputs` (T x 2H) from a zero state;
  /// returns T x D top-layer outputs.
  ag::Var run_decoder(ag::Graph& g, ag::Var inputs) const;

  /// Summed log-probability of an arbitrary legal action sequence under
  /// teacher forcing (the quantity the beam search maximises).
  ag::Var sequence_log_prob(ag::Graph& g, const SentenceCache& cache, const std::vector<DecodeAction>& actions,
                            bool single_root = false) const;
  double sequence_log_prob(const EncodedSentence& s, const std::vector<DecodeAction>& actions,
                           bool single_root = false) const;

  /// Raw arc scores (rows of `decoder_out`) x (n+1).
  ag::Var arc_scores(ag::Graph& g, ag::Var decoder_out, const SentenceCache& cache) const;
  /// Label scores for m (decoder row, child position) pairs: m x K.
  ag::Var label_scores(ag::Graph& g, ag::Var decoder_rows, const SentenceCache& cache,
                       const std::vector<int>& children) const;

  /// Softmax of `scores` restricted to `legal` positions.
  static AttentionResult attend(std::span<const double> scores, const std::vector<int>& legal);

  const ArcBiaffine& arc() const { return arc_; }
  const LabelBiaffine& label() const { return label_; }
  const std::vector<nn::LstmParams>& decoder() const { return decoder_; }

 protected:
  const nn::EncoderParams& encoder() const override { return encoder_; }

 private:
  nn::EncoderParams encoder_;
  std::vector<nn::LstmParams> decoder_;
  ArcBiaffine arc_;
  LabelBiaffine label_;
};

}  // namespace stackptr
