#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "stackptr/tree_oracle.hpp"
#include "stackptr/treebank.hpp"
#include "stackptr/vocab.hpp"

namespace stackptr {

/// Which higher-order terms feed the decoder input.
enum class Variant { org, gpar, sib, full };
enum class PosMode { gold, pred, none };
enum class ModelKind { stackptr, biaf };

Variant parse_variant(std::string_view s);
const char* variant_name(Variant v);
PosMode parse_pos_mode(std::string_view s);
const char* pos_mode_name(PosMode m);
ModelKind parse_model_kind(std::string_view s);
const char* model_kind_name(ModelKind k);

inline bool uses_grandparent(Variant v) { return v == Variant::gpar || v == Variant::full; }
inline bool uses_sibling(Variant v) { return v == Variant::sib || v == Variant::full; }

/// Every hyper-parameter. Defaults are the full-size settings; desk-scale runs
/// override the sizes in their config file.
struct ModelConfig {
  Variant variant = Variant::full;
  PosMode pos_mode = PosMode::gold;
  PosColumn pos_column = PosColumn::upos;
  ChildOrder child_order = ChildOrder::inside_out;

  std::size_t word_dim = 100;
  std::size_t char_dim = 50;
  std::size_t pos_dim = 100;
  std::size_t cnn_window = 3;
  std::size_t cnn_filters = 50;
  std::size_t encoder_layers = 3;
  std::size_t encoder_hidden = 512;
  std::size_t decoder_layers = 1;
  std::size_t decoder_hidden = 512;
  std::size_t arc_mlp = 512;
  std::size_t label_mlp = 128;

  double dropout_embedding = 0.33;
  double dropout_recurrent = 0.33;
  double dropout_layer = 0.33;

  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.9;
  double adam_epsilon = 1e-8;
  double decay_rate = 0.75;
  std::size_t patience = 5;
  double grad_clip = 5.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;

  bool single_root = false;
  std::size_t dev_beam = 1;
  PunctPolicy dev_punct = PunctPolicy::ud;
  std::string embeddings;  // optional word-vector text file

  bool operator==(const ModelConfig&) const = default;
};

/// Throws std::invalid_argument on unknown keys or ill-typed values; missing
/// keys keep their defaults.
ModelConfig config_from_json(std::string_view text);
std::string config_to_json(const ModelConfig& config);
ModelConfig load_config(const std::string& path);

/// Rejects sizes that cannot build a model (zero dims, even CNN window, ...).
void check_config(const ModelConfig& config);

}  // namespace stackptr
