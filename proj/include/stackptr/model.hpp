#pragma once

#include <memory>
#include <vector>

#include "stackptr/autograd.hpp"
#include "stackptr/config.hpp"
#include "stackptr/encoder.hpp"
#include "stackptr/tree_oracle.hpp"
#include "stackptr/vocab.hpp"

namespace stackptr {

struct DecodeOptions {
  std::size_t beam = 1;
  bool single_root = false;
  // Stack-pointer only: return the best complete parse over beam widths
  // 1..beam so the result never gets worse as the beam grows.
  bool monotone = true;
};

struct ParseResult {
  std::vector<int> heads;   // heads[0] = -1
  std::vector<int> labels;  // label ids; labels[0] = -1
  double log_prob = 0.0;    // arc log-probability (stack-pointer) or tree score (biaf)
  std::vector<DecodeAction> actions;  // empty for graph-based models
};

/// Gold tree in id form.
struct GoldTree {
  std::vector<int> heads;
  std::vector<int> labels;
};

GoldTree encode_tree(const Vocabulary& vocab, const DependencyTree& tree);

/// Biaffine label classifier over MLP-projected head and child rows:
/// score_l = h^T W_l c + U_l^T h + V_l^T c + b_l.
struct LabelBiaffine {
  ag::Parameter* head_w = nullptr;  // in_head x L
  ag::Parameter* head_b = nullptr;
  ag::Parameter* child_w = nullptr;  // in_child x L
  ag::Parameter* child_b = nullptr;
  ag::Parameter* w = nullptr;  // L x (K*L)
  ag::Parameter* u = nullptr;  // L x K
  ag::Parameter* v = nullptr;  // L x K
  ag::Parameter* b = nullptr;  // 1 x K
  std::size_t dim = 0;
  std::size_t labels = 0;

  static LabelBiaffine build(ag::ParameterSet& ps, nn::Initializer& init, const std::string& prefix,
                             std::size_t in_head, std::size_t in_child, std::size_t dim, std::size_t labels);

  ag::Var project_head(ag::Graph& g, ag::Var rows) const;
  ag::Var project_child(ag::Graph& g, ag::Var rows) const;
  /// Scores for m (head, child) pairs of already-projected rows: m x K.
  ag::Var scores(ag::Graph& g, ag::Var heads, ag::Var children) const;
};

/// Summed label cross-entropy of gold label ids over the rows of `scores`.
ag::Var label_nll(ag::Graph& g, ag::Var scores, const std::vector<int>& gold);

/// Elementwise -inf mask constant (0 where allowed).
ag::Var mask_constant(ag::Graph& g, ag::Shape shape, const std::vector<bool>& allowed);

/// Sum over lines of -log(softmax(scores + mask)[target]) along `axis`. Finite
/// for any finite scores; masked entries never reach the log.
ag::Var masked_nll(ag::Graph& g, ag::Var scores, const std::vector<bool>& allowed, const std::vector<int>& targets,
                   int axis);

class Model {
 public:
  Model(ModelConfig config, Vocabulary vocab) : config_(std::move(config)), vocab_(std::move(vocab)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  virtual ModelKind kind() const = 0;

  /// Training objective for one sentence (arc + label negative log-likelihood).
  virtual ag::Var loss(ag::Graph& g, const EncodedSentence& s, const GoldTree& gold, nn::Mode mode) const = 0;

  virtual ParseResult parse(const EncodedSentence& s, const DecodeOptions& options) const = 0;

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ag::ParameterSet& params() { return params_; }
  const ag::ParameterSet& params() const { return params_; }

  /// Copies vectors from a word-embedding table into the word embedding rows.
  void set_word_embeddings(const EmbeddingTable& table);

 protected:
  virtual const nn::EncoderParams& encoder() const = 0;

  ModelConfig config_;
  Vocabulary vocab_;
  ag::ParameterSet params_;
};

std::unique_ptr<Model> make_model(ModelKind kind, const ModelConfig& config, const Vocabulary& vocab);

}  // namespace stackptr
