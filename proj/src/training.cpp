#include "stackptr/training.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "stackptr/error.hpp"
#include "stackptr/inference.hpp"
#include "stackptr/metrics.hpp"

namespace stackptr {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void zero_padding_grads(ag::ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    ag::Parameter& p = params[i];
    if (p.padding_row) std::fill(p.grad.begin(), p.grad.begin() + static_cast<std::ptrdiff_t>(p.shape.cols), 0.0);
  }
}

std::string norm_report(const ag::ParameterSet& params) {
  std::ostringstream out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ag::Parameter& p = params[i];
    double v = 0.0, g = 0.0;
    for (double x : p.value) v += x * x;
    for (double x : p.grad) g += x * x;
    out << "\n  " << p.name << ": |w|=" << std::sqrt(v) << " |g|=" << std::sqrt(g);
  }
  return out.str();
}

std::vector<std::vector<double>> snapshot(const ag::ParameterSet& params) {
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < params.size(); ++i) values.push_back(params[i].value);
  return values;
}

void restore(ag::ParameterSet& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = values[i];
}

}  // namespace

std::uint64_t step_seed(std::uint64_t seed, std::size_t epoch, std::size_t index) {
  return splitmix(splitmix(splitmix(seed) ^ epoch) ^ index);
}

OptimState OptimState::init(const ag::ParameterSet& params, double lr) {
  OptimState s;
  s.lr = lr;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params[i].value.size(), 0.0);
    s.v.emplace_back(params[i].value.size(), 0.0);
  }
  return s;
}

double grad_norm(const ag::ParameterSet& params) {
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double g : params[i].grad) total += g * g;
  }
  return std::sqrt(total);
}

double clip_gradients(ag::ParameterSet& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (double& g : params[i].grad) g *= scale;
    }
  }
  return norm;
}

void adam_step(ag::ParameterSet& params, OptimState& state, const ModelConfig& config) {
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimiser state does not match parameters");
  zero_padding_grads(params);
  clip_gradients(params, config.grad_clip);
  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ag::Parameter& p = params[i];
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    if (m.size() != p.value.size()) throw ShapeError("adam_step: moment shape differs for " + p.name);
    const std::size_t start = p.padding_row ? p.shape.cols : 0;
    for (std::size_t k = start; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      p.value[k] -= state.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.adam_epsilon);
    }
  }
}

bool lr_schedule(OptimState& state, double score, const ModelConfig& config) {
  if (!state.has_best || score > state.best_score) {
    state.has_best = true;
    state.best_score = score;
    state.bad_epochs = 0;
    return false;
  }
  if (++state.bad_epochs < config.patience) return false;
  state.lr *= config.decay_rate;
  state.bad_epochs = 0;
  ++state.decays;
  return true;
}

TrainResult train(ModelKind kind, const ModelConfig& config, const std::vector<TreebankEntry>& train_set,
                  const std::vector<TreebankEntry>& dev_set, const TrainOptions& options) {
  if (train_set.empty()) throw DataError("training set is empty");
  check_config(config);
  TrainResult result;
  const Vocabulary vocab = Vocabulary::fit(train_set, config.pos_column);
  result.model = make_model(kind, config, vocab);
  Model& model = *result.model;
  if (!config.embeddings.empty()) {
    EmbeddingTable table = load_embeddings(config.embeddings, vocab.words, config.word_dim, config.seed);
    model.set_word_embeddings(table);
    result.embedding_coverage = table.coverage;
  }

  std::vector<EncodedSentence> encoded;
  std::vector<GoldTree> gold;
  for (const auto& e : train_set) {
    encoded.push_back(encode(vocab, e.sentence));
    gold.push_back(encode_tree(vocab, e.tree));
  }
  const std::vector<TreebankEntry>& selection = dev_set.empty() ? train_set : dev_set;
  std::vector<EncodedSentence> dev_encoded;
  std::vector<Sentence> dev_sentences;
  for (const auto& e : selection) {
    dev_encoded.push_back(encode(vocab, e.sentence));
    dev_sentences.push_back(e.sentence);
  }

  ag::ParameterSet& params = model.params();
  OptimState state = OptimState::init(params, config.learning_rate);
  std::vector<std::vector<double>> best_values = snapshot(params);
  std::mt19937_64 shuffle_rng(splitmix(config.seed ^ 0x5348554646ULL));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  const DecodeOptions decode_options{config.dev_beam, config.single_root};
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::size_t end = std::min(order.size(), start + batch);
      params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        ag::Graph g(step_seed(config.seed, epoch, idx));
        const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + " (sentence " +
                                  std::to_string(idx + 1) + "); parameter norms:";
        ag::Var loss;
        try {
          loss = model.loss(g, encoded[idx], gold[idx], nn::Mode::train);
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " at " + where + norm_report(params));
        }
        const double value = g.scalar(loss);
        if (!std::isfinite(value)) throw NumericError("non-finite loss at " + where + norm_report(params));
        g.backward(loss);
        batch_loss += value;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (double& x : params[p].grad) x *= scale;
      }
      if (!std::isfinite(grad_norm(params))) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           "; parameter norms:" + norm_report(params));
      }
      adam_step(params, state, config);
      epoch_loss += batch_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = state.lr;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    const auto parses = batch_parse(model, dev_encoded, decode_options, 1);
    const auto predicted = to_entries(vocab, dev_sentences, parses);
    const EvalReport report = evaluate(selection, predicted, config.dev_punct);
    rec.dev_uas = report.uas;
    rec.dev_las = report.las;
    if (!have_best || rec.dev_uas > result.best_dev_uas) {
      have_best = true;
      rec.best = true;
      result.best_dev_uas = rec.dev_uas;
      result.best_epoch = epoch;
      best_values = snapshot(params);
    }
    lr_schedule(state, rec.dev_uas, config);
    result.log.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  restore(params, best_values);
  return result;
}

std::string format_log(const std::vector<EpochRecord>& log) {
  std::string out = "epoch\tlr\ttrain_loss\tdev_uas\tdev_las\tbest\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9f\t%.2f\t%.2f\t%d\n", r.epoch, r.lr, r.train_loss, r.dev_uas,
                  r.dev_las, r.best ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace stackptr
