#include "stackptr/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"
#include "stackptr/error.hpp"

namespace stackptr {

using nlohmann::json;

Variant parse_variant(std::string_view s) {
  if (s == "org") return Variant::org;
  if (s == "gpar" || s == "+gpar") return Variant::gpar;
  if (s == "sib" || s == "+sib") return Variant::sib;
  if (s == "full") return Variant::full;
  throw std::invalid_argument("unknown variant: " + std::string(s));
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::org: return "org";
    case Variant::gpar: return "gpar";
    case Variant::sib: return "sib";
    case Variant::full: return "full";
  }
  return "full";
}

PosMode parse_pos_mode(std::string_view s) {
  if (s == "gold") return PosMode::gold;
  if (s == "pred") return PosMode::pred;
  if (s == "none") return PosMode::none;
  throw std::invalid_argument("unknown pos_mode: " + std::string(s));
}

const char* pos_mode_name(PosMode m) {
  switch (m) {
    case PosMode::gold: return "gold";
    case PosMode::pred: return "pred";
    case PosMode::none: return "none";
  }
  return "gold";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "stackptr") return ModelKind::stackptr;
  if (s == "biaf") return ModelKind::biaf;
  throw std::invalid_argument("unknown model kind: " + std::string(s));
}

const char* model_kind_name(ModelKind k) { return k == ModelKind::stackptr ? "stackptr" : "biaf"; }

namespace {

const char* child_order_name(ChildOrder o) {
  return o == ChildOrder::inside_out ? "inside_out" : "inside_out_interleaved";
}

ChildOrder parse_child_order(std::string_view s) {
  if (s == "inside_out") return ChildOrder::inside_out;
  if (s == "inside_out_interleaved") return ChildOrder::inside_out_interleaved;
  throw std::invalid_argument("unknown child_order: " + std::string(s));
}

const char* pos_column_name(PosColumn c) { return c == PosColumn::upos ? "upos" : "xpos"; }

PosColumn parse_pos_column(std::string_view s) {
  if (s == "upos") return PosColumn::upos;
  if (s == "xpos") return PosColumn::xpos;
  throw std::invalid_argument("unknown pos_column: " + std::string(s));
}

// One reader/writer pair per field keeps both directions in sync.
struct Field {
  std::function<json(const ModelConfig&)> get;
  std::function<void(ModelConfig&, const json&)> set;
};

template <typename T>
Field plain(T ModelConfig::*m) {
  return {[m](const ModelConfig& c) { return json(c.*m); },
          [m](ModelConfig& c, const json& j) { c.*m = j.get<T>(); }};
}

template <typename E>
Field named(E ModelConfig::*m, const char* (*to)(E), E (*from)(std::string_view)) {
  return {[m, to](const ModelConfig& c) { return json(to(c.*m)); },
          [m, from](ModelConfig& c, const json& j) { c.*m = from(j.get<std::string>()); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f{
      {"variant", named(&ModelConfig::variant, variant_name, parse_variant)},
      {"pos_mode", named(&ModelConfig::pos_mode, pos_mode_name, parse_pos_mode)},
      {"pos_column", named(&ModelConfig::pos_column, pos_column_name, parse_pos_column)},
      {"child_order", named(&ModelConfig::child_order, child_order_name, parse_child_order)},
      {"word_dim", plain(&ModelConfig::word_dim)},
      {"char_dim", plain(&ModelConfig::char_dim)},
      {"pos_dim", plain(&ModelConfig::pos_dim)},
      {"cnn_window", plain(&ModelConfig::cnn_window)},
      {"cnn_filters", plain(&ModelConfig::cnn_filters)},
      {"encoder_layers", plain(&ModelConfig::encoder_layers)},
      {"encoder_hidden", plain(&ModelConfig::encoder_hidden)},
      {"decoder_layers", plain(&ModelConfig::decoder_layers)},
      {"decoder_hidden", plain(&ModelConfig::decoder_hidden)},
      {"arc_mlp", plain(&ModelConfig::arc_mlp)},
      {"label_mlp", plain(&ModelConfig::label_mlp)},
      {"dropout_embedding", plain(&ModelConfig::dropout_embedding)},
      {"dropout_recurrent", plain(&ModelConfig::dropout_recurrent)},
      {"dropout_layer", plain(&ModelConfig::dropout_layer)},
      {"learning_rate", plain(&ModelConfig::learning_rate)},
      {"beta1", plain(&ModelConfig::beta1)},
      {"beta2", plain(&ModelConfig::beta2)},
      {"adam_epsilon", plain(&ModelConfig::adam_epsilon)},
      {"decay_rate", plain(&ModelConfig::decay_rate)},
      {"patience", plain(&ModelConfig::patience)},
      {"grad_clip", plain(&ModelConfig::grad_clip)},
      {"batch_size", plain(&ModelConfig::batch_size)},
      {"epochs", plain(&ModelConfig::epochs)},
      {"seed", plain(&ModelConfig::seed)},
      {"single_root", plain(&ModelConfig::single_root)},
      {"dev_beam", plain(&ModelConfig::dev_beam)},
      {"dev_punct", named(&ModelConfig::dev_punct, punct_policy_name, parse_punct_policy)},
      {"embeddings", plain(&ModelConfig::embeddings)},
  };
  return f;
}

}  // namespace

ModelConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    auto it = fields().find(key);
    if (it == fields().end()) throw std::invalid_argument("unknown config key: " + key);
    try {
      it->second.set(c, value);
    } catch (const json::exception& e) {
      throw std::invalid_argument("config key " + key + ": " + e.what());
    }
  }
  check_config(c);
  return c;
}

std::string config_to_json(const ModelConfig& config) {
  json j = json::object();
  for (const auto& [key, field] : fields()) j[key] = field.get(config);
  return j.dump(2);
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void check_config(const ModelConfig& c) {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(c.word_dim, "word_dim");
  positive(c.char_dim, "char_dim");
  if (c.pos_mode != PosMode::none) positive(c.pos_dim, "pos_dim");
  positive(c.cnn_filters, "cnn_filters");
  positive(c.encoder_layers, "encoder_layers");
  positive(c.encoder_hidden, "encoder_hidden");
  positive(c.decoder_layers, "decoder_layers");
  positive(c.decoder_hidden, "decoder_hidden");
  positive(c.arc_mlp, "arc_mlp");
  positive(c.label_mlp, "label_mlp");
  positive(c.batch_size, "batch_size");
  positive(c.dev_beam, "dev_beam");
  if (c.cnn_window == 0 || c.cnn_window % 2 == 0) throw std::invalid_argument("cnn_window must be odd");
  for (double p : {c.dropout_embedding, c.dropout_recurrent, c.dropout_layer}) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout rates must lie in [0, 1)");
  }
  if (c.learning_rate < 0.0) throw std::invalid_argument("learning_rate must be non-negative");
  if (c.decay_rate <= 0.0 || c.decay_rate > 1.0) throw std::invalid_argument("decay_rate must lie in (0, 1]");
  if (c.grad_clip <= 0.0) throw std::invalid_argument("grad_clip must be positive");
}

}  // namespace stackptr
