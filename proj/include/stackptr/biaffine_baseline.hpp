#pragma once

// Graph-based baseline: the same encoder, biaffine scores for every ordered
// (head, child) pair, and maximum-spanning-arborescence decoding.

#include <vector>

#include "stackptr/model.hpp"
#include "stackptr/stackptr_model.hpp"

namespace stackptr {

/// Dense scores over positions 0..n. arcs[h][c] scores arc h -> c; the
/// diagonal and column 0 are -inf. labels, when requested, holds K scores
/// per pair at labels[(h * (n+1) + c) * K + k].
struct ArcScoreMatrix {
  std::size_t n = 0;
  std::vector<std::vector<double>> arcs;
  std::size_t label_count = 0;
  std::vector<double> labels;
};

class BiaffineModel final : public Model {
 public:
  BiaffineModel(const ModelConfig& config, const Vocabulary& vocab);

  ModelKind kind() const override { return ModelKind::biaf; }
  /// Per-word head cross-entropy (softmax over candidate heads) plus label
  /// cross-entropy on gold arcs.
  ag::Var loss(ag::Graph& g, const EncodedSentence& s, const GoldTree& gold, nn::Mode mode) const override;
  /// MST decode; log_prob holds the tree score.
  ParseResult parse(const EncodedSentence& s, const DecodeOptions& options) const override;

  /// (n+1) x (n+1) raw arc scores, rows heads and columns children.
  ag::Var arc_scores(ag::Graph& g, ag::Var states) const;
  ArcScoreMatrix score_all(const EncodedSentence& s, bool with_labels = false) const;

  const ArcBiaffine& arc() const { return arc_; }
  const LabelBiaffine& label() const { return label_; }

 protected:
  const nn::EncoderParams& encoder() const override { return encoder_; }

 private:
  nn::EncoderParams encoder_;
  ArcBiaffine arc_;
  LabelBiaffine label_;
};

}  // namespace stackptr
