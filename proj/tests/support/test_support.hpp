#pragma once

// Shared helpers for unit and acceptance tests: random trees, tiny models,
// finite-difference gradient checks and brute-force oracles.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stackptr/autograd.hpp"
#include "stackptr/biaffine_baseline.hpp"
#include "stackptr/config.hpp"
#include "stackptr/model.hpp"
#include "stackptr/stackptr_model.hpp"
#include "stackptr/tree_oracle.hpp"
#include "stackptr/treebank.hpp"
#include "stackptr/vocab.hpp"

namespace stackptr::testing {

inline std::string data_path(const std::string& name) { return std::string(STACKPTR_TEST_DATA) + "/" + name; }

/// Uniform random arborescence over words 1..n rooted at 0 (Wilson's
/// algorithm on the complete graph); heads[0] = -1.
inline std::vector<int> random_tree(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> next(n + 1, -1);
  std::vector<bool> in_tree(n + 1, false);
  in_tree[0] = true;
  auto other = [&](int u) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
    int v = pick(rng);
    return v >= u ? v + 1 : v;
  };
  for (std::size_t i = 1; i <= n; ++i) {
    int u = static_cast<int>(i);
    while (!in_tree[u]) {
      next[u] = other(u);
      u = next[u];
    }
    u = static_cast<int>(i);
    while (!in_tree[u]) {
      in_tree[u] = true;
      u = next[u];
    }
  }
  next[0] = -1;
  return next;
}

/// A sentence whose words are w1..wn with cycling POS tags.
inline Sentence make_sentence(std::size_t n, std::uint64_t salt = 0) {
  static const char* kWords[] = {"the", "dog", "sees", "a", "cat", "with", "red", "hat", "and", "runs", "fast", "home"};
  static const char* kPos[] = {"DET", "NOUN", "VERB", "DET", "NOUN", "ADP", "ADJ", "NOUN", "CCONJ", "VERB", "ADV", "NOUN"};
  Sentence s;
  s.words.assign(1, kRootWord);
  s.upos.assign(1, kRootWord);
  s.xpos.assign(1, kRootWord);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = (i + salt) % 12;
    s.words.emplace_back(kWords[k]);
    s.upos.emplace_back(kPos[k]);
    s.xpos.emplace_back("_");
  }
  return s;
}

inline std::vector<std::string> default_labels() { return {"root", "nsubj", "obj", "det", "case", "amod"}; }

/// Vocabulary covering make_sentence words and a small label set.
inline Vocabulary make_vocab(const std::vector<std::string>& labels = default_labels()) {
  std::vector<TreebankEntry> data;
  TreebankEntry e;
  e.sentence = make_sentence(12);
  e.tree.heads.assign(13, 0);
  e.tree.heads[0] = -1;
  e.tree.labels.assign(13, labels.front());
  e.tree.labels[0] = "";
  for (std::size_t i = 1; i < 13; ++i) e.tree.labels[i] = labels[i % labels.size()];
  data.push_back(e);
  return Vocabulary::fit(data);
}

/// Small configuration for gradient checks and property tests.
inline ModelConfig tiny_config(std::size_t hidden = 4, std::uint64_t seed = 1) {
  ModelConfig c;
  c.word_dim = 4;
  c.char_dim = 3;
  c.pos_dim = 3;
  c.cnn_filters = 3;
  c.encoder_layers = 1;
  c.encoder_hidden = hidden;
  c.decoder_layers = 1;
  c.decoder_hidden = hidden;
  c.arc_mlp = hidden;
  c.label_mlp = 3;
  c.seed = seed;
  c.batch_size = 4;
  return c;
}

/// Random gold labels for a tree.
inline GoldTree make_gold(const Vocabulary& vocab, const std::vector<int>& heads, std::mt19937_64& rng) {
  GoldTree g;
  g.heads = heads;
  g.labels.assign(heads.size(), -1);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vocab.labels.size()) - 1);
  for (std::size_t i = 1; i < heads.size(); ++i) g.labels[i] = pick(rng);
  return g;
}

/// Overwrites every parameter with U(-scale, scale) values (padding rows stay zero).
inline void randomize(ag::ParameterSet& ps, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ag::Parameter& p = ps[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      p.value[k] = (p.padding_row && k < p.shape.cols) ? 0.0 : u(rng);
    }
  }
}

inline void zero_all(ag::ParameterSet& ps) {
  for (std::size_t i = 0; i < ps.size(); ++i) std::fill(ps[i].value.begin(), ps[i].value.end(), 0.0);
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;
  std::string worst_where;
};

/// Compares the analytic gradient of `loss` with central differences for
/// every scalar of every parameter. An entry passes when its relative error
/// is below `rel_tol` or its absolute error below `abs_tol`.
inline GradCheck check_gradients(ag::ParameterSet& ps, const std::function<ag::Var(ag::Graph&)>& loss,
                                 double step = 1e-5, double rel_tol = 1e-4, double abs_tol = 1e-7) {
  ps.zero_grad();
  {
    ag::Graph g(7);
    g.backward(loss(g));
  }
  GradCheck r;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ag::Parameter& p = ps[i];
    const std::vector<double> analytic = p.grad;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double orig = p.value[k];
      p.value[k] = orig + step;
      double plus, minus;
      {
        ag::Graph g(7);
        plus = g.scalar(loss(g));
      }
      p.value[k] = orig - step;
      {
        ag::Graph g(7);
        minus = g.scalar(loss(g));
      }
      p.value[k] = orig;
      const double numeric = (plus - minus) / (2 * step);
      const double abs_err = std::abs(analytic[k] - numeric);
      const double denom = std::max(std::abs(analytic[k]), std::abs(numeric));
      const double rel = denom > 0 ? abs_err / denom : 0.0;
      ++r.checked;
      if (rel >= rel_tol && abs_err >= abs_tol) {
        ++r.failures;
        if (rel > r.worst_rel) {
          r.worst_rel = rel;
          r.worst_where = p.name + "[" + std::to_string(k) + "] analytic " + std::to_string(analytic[k]) +
                          " numeric " + std::to_string(numeric);
        }
      }
    }
  }
  return r;
}

/// Every complete legal action sequence for an n-word sentence.
inline std::vector<std::vector<DecodeAction>> enumerate_sequences(std::size_t n, bool single_root = false) {
  std::vector<std::vector<DecodeAction>> out;
  std::vector<DecodeAction> prefix;
  std::function<void(const ParserState&)> rec = [&](const ParserState& st) {
    if (st.done()) {
      out.push_back(prefix);
      return;
    }
    for (int t : st.legal_targets(single_root)) {
      ParserState next = st;
      prefix.push_back(next.apply(t, single_root));
      rec(next);
      prefix.pop_back();
    }
  };
  rec(ParserState(n));
  return out;
}

/// Best-scoring arborescence by enumerating every head assignment.
inline double brute_force_best(const std::vector<std::vector<double>>& scores, bool single_root = false) {
  const std::size_t n = scores.size() - 1;
  std::vector<int> heads(n + 1, 0);
  heads[0] = -1;
  double best = -INFINITY;
  std::function<void(std::size_t)> rec = [&](std::size_t c) {
    if (c > n) {
      if (validate(heads)) return;
      int roots = 0;
      double s = 0;
      for (std::size_t i = 1; i <= n; ++i) {
        roots += heads[i] == 0;
        s += scores[static_cast<std::size_t>(heads[i])][i];
      }
      if (single_root && roots != 1) return;
      best = std::max(best, s);
      return;
    }
    for (std::size_t h = 0; h <= n; ++h) {
      if (h == c) continue;
      heads[c] = static_cast<int>(h);
      rec(c + 1);
    }
  };
  rec(1);
  return best;
}

}  // namespace stackptr::testing
