#include "stackptr/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "stackptr/error.hpp"

namespace stackptr {

using ag::Graph;
using ag::Shape;
using ag::Var;

namespace {

// Action history shared between beam items; point steps keep the decoder's
// top-layer output so labels can be assigned once the search ends.
struct History {
  DecodeAction action;
  std::vector<double> top;
  std::shared_ptr<const History> prev;
};

struct BeamItem {
  ParserState state;
  std::vector<std::vector<double>> h;  // per decoder layer, 1 x D
  std::vector<std::vector<double>> c;
  double log_prob = 0.0;
  std::shared_ptr<const History> history;
};

struct Candidate {
  std::size_t item;
  int target;
  double log_prob;
};

struct CachedValues {
  Shape states_shape, arc_shape, label_shape;
  std::vector<double> states, arc_child, label_child;
};

CachedValues run_encoder(const StackPointerModel& model, const EncodedSentence& s) {
  Graph g;
  SentenceCache cache = model.prepare(g, s, nn::Mode::eval);
  CachedValues v;
  v.states_shape = g.shape(cache.states);
  v.arc_shape = g.shape(cache.arc_child);
  v.label_shape = g.shape(cache.label_child);
  auto copy = [&](Var x) {
    auto span = g.value(x);
    return std::vector<double>(span.begin(), span.end());
  };
  v.states = copy(cache.states);
  v.arc_child = copy(cache.arc_child);
  v.label_child = copy(cache.label_child);
  return v;
}

SentenceCache view_cache(Graph& g, const CachedValues& v) {
  return {g.view(v.states_shape, v.states), g.view(v.arc_shape, v.arc_child),
          g.view(v.label_shape, v.label_child)};
}

Var stack_rows(Graph& g, const std::vector<const std::vector<double>*>& rows, std::size_t width) {
  std::vector<double> data;
  data.reserve(rows.size() * width);
  for (const auto* r : rows) data.insert(data.end(), r->begin(), r->end());
  return g.constant({rows.size(), width}, std::move(data));
}

std::vector<int> assign_labels(const StackPointerModel& model, const CachedValues& cached,
                               const std::shared_ptr<const History>& history, std::size_t n, std::size_t width) {
  std::vector<const History*> points;
  for (const History* node = history.get(); node != nullptr; node = node->prev.get()) {
    if (!node->action.is_pop()) points.push_back(node);
  }
  std::vector<int> labels(n + 1, -1);
  if (points.empty()) return labels;
  Graph g;
  SentenceCache cache = view_cache(g, cached);
  std::vector<const std::vector<double>*> rows;
  std::vector<int> children;
  for (const History* p : points) {
    rows.push_back(&p->top);
    children.push_back(p->action.child);
  }
  Var scores = model.label_scores(g, stack_rows(g, rows, width), cache, children);
  const std::size_t K = g.shape(scores).cols;
  auto values = g.value(scores);
  for (std::size_t r = 0; r < children.size(); ++r) {
    const double* row = values.data() + r * K;
    labels[static_cast<std::size_t>(children[r])] = static_cast<int>(std::max_element(row, row + K) - row);
  }
  return labels;
}

BeamOutcome search(const StackPointerModel& model, const CachedValues& cached, std::size_t n, std::size_t beam,
                   bool single_root) {
  if (beam == 0) throw std::invalid_argument("beam size must be at least 1");
  const ModelConfig& config = model.config();
  const std::size_t D = config.decoder_hidden;
  const std::size_t layers = model.decoder().size();
  // Log-probabilities only decrease along a path, so a dropped candidate can
  // beat the final answer only if it already scored higher when dropped.
  double best_dropped = -std::numeric_limits<double>::infinity();

  std::vector<BeamItem> live;
  live.push_back({ParserState(n), std::vector<std::vector<double>>(layers, std::vector<double>(D, 0.0)),
                  std::vector<std::vector<double>>(layers, std::vector<double>(D, 0.0)), 0.0, nullptr});
  std::vector<BeamItem> complete;

  while (!live.empty()) {
    Graph g;
    SentenceCache cache = view_cache(g, cached);
    std::vector<StepContext> contexts;
    for (const BeamItem& item : live) contexts.push_back(item.state.context());
    Var x = compose_input(g, cache.states, contexts, config.variant);
    std::vector<Var> h_out(layers), c_out(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<const std::vector<double>*> hs, cs;
      for (const BeamItem& item : live) {
        hs.push_back(&item.h[l]);
        cs.push_back(&item.c[l]);
      }
      nn::LstmState st = nn::lstm_cell(g, x, stack_rows(g, hs, D), stack_rows(g, cs, D), model.decoder()[l]);
      h_out[l] = st.h;
      c_out[l] = st.c;
      x = st.h;
    }
    Var e = model.arc_scores(g, x, cache);
    auto scores = g.value(e);

    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const std::vector<int> legal = live[i].state.legal_targets(single_root);
      if (legal.empty()) throw InvariantError("decoder reached a state with no legal action");
      const double* row = scores.data() + i * (n + 1);
      double m = -std::numeric_limits<double>::infinity();
      for (int t : legal) m = std::max(m, row[t]);
      double z = 0.0;
      for (int t : legal) z += std::exp(row[t] - m);
      const double lse = m + std::log(z);
      for (int t : legal) candidates.push_back({i, t, live[i].log_prob + row[t] - lse});
    }
    // Candidates are generated in (item, target) order, so a stable sort
    // breaks ties by earlier item and then lower target index.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.log_prob > b.log_prob; });
    if (candidates.size() > beam) {
      best_dropped = std::max(best_dropped, candidates[beam].log_prob);
      candidates.resize(beam);
    }

    std::vector<BeamItem> next;
    for (const Candidate& cand : candidates) {
      const BeamItem& src = live[cand.item];
      BeamItem item{src.state, {}, {}, cand.log_prob, nullptr};
      const DecodeAction action = item.state.apply(cand.target, single_root);
      for (std::size_t l = 0; l < layers; ++l) {
        auto hv = g.value(h_out[l]).subspan(cand.item * D, D);
        auto cv = g.value(c_out[l]).subspan(cand.item * D, D);
        item.h.emplace_back(hv.begin(), hv.end());
        item.c.emplace_back(cv.begin(), cv.end());
      }
      auto node = std::make_shared<History>();
      node->action = action;
      if (!action.is_pop()) node->top = item.h.back();
      node->prev = src.history;
      item.history = std::move(node);
      (item.state.done() ? complete : next).push_back(std::move(item));
    }
    live = std::move(next);
  }

  if (complete.empty()) throw InvariantError("beam search produced no complete parse");
  const BeamItem* best = &complete.front();
  for (const BeamItem& item : complete) {
    if (item.log_prob > best->log_prob) best = &item;
  }

  ParseResult result;
  result.heads = best->state.heads();
  for (const History* node = best->history.get(); node != nullptr; node = node->prev.get()) {
    result.actions.push_back(node->action);
  }
  std::reverse(result.actions.begin(), result.actions.end());
  // Batched rows round differently with the beam size; rescoring the
  // sequence alone makes the same parse report the same score at any width.
  {
    Graph g;
    result.log_prob = g.scalar(model.sequence_log_prob(g, view_cache(g, cached), result.actions, single_root));
  }
  result.labels = assign_labels(model, cached, best->history, n, D);
  if (auto v = validate(result.heads)) {
    throw InvariantError("decoder produced an invalid tree at word " + std::to_string(v->index) + ": " + v->message);
  }
  const bool exact = best_dropped <= best->log_prob;
  return {std::move(result), exact};
}

}  // namespace

BeamOutcome beam_search(const StackPointerModel& model, const EncodedSentence& s, std::size_t beam,
                        bool single_root) {
  return search(model, run_encoder(model, s), s.size(), beam, single_root);
}

ParseResult decode(const StackPointerModel& model, const EncodedSentence& s, const DecodeOptions& options) {
  const CachedValues cached = run_encoder(model, s);
  BeamOutcome full = search(model, cached, s.size(), options.beam, options.single_root);
  if (!options.monotone || full.exact) return std::move(full.result);
  // Widths are tried in increasing order; a later width replaces the
  // incumbent only with a strictly better score.
  ParseResult best;
  bool have = false;
  for (std::size_t k = 1; k < options.beam; ++k) {
    BeamOutcome o = search(model, cached, s.size(), k, options.single_root);
    if (!have || o.result.log_prob > best.log_prob) {
      best = std::move(o.result);
      have = true;
    }
    if (o.exact) return best;
  }
  if (!have || full.result.log_prob > best.log_prob) best = std::move(full.result);
  return best;
}

std::vector<ParseResult> batch_parse(const Model& model, const std::vector<EncodedSentence>& sentences,
                                     const DecodeOptions& options, std::size_t workers) {
  std::vector<ParseResult> results(sentences.size());
  workers = std::max<std::size_t>(1, std::min(workers, sentences.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < sentences.size(); ++i) results[i] = model.parse(sentences[i], options);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= sentences.size()) return;
      try {
        results[i] = model.parse(sentences[i], options);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = sentences.size();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<TreebankEntry> to_entries(const Vocabulary& vocab, const std::vector<Sentence>& sentences,
                                      const std::vector<ParseResult>& results) {
  if (sentences.size() != results.size()) throw InvariantError("to_entries: sentence and result counts differ");
  std::vector<TreebankEntry> out;
  out.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const ParseResult& r = results[i];
    if (r.heads.size() != sentences[i].words.size()) {
      throw InvariantError("to_entries: parse " + std::to_string(i + 1) + " has the wrong length");
    }
    TreebankEntry e;
    e.sentence = sentences[i];
    e.tree.heads = r.heads;
    e.tree.labels.assign(r.heads.size(), "");
    for (std::size_t w = 1; w < r.heads.size(); ++w) {
      const int id = r.labels.at(w);
      if (id < 0) throw InvariantError("to_entries: word " + std::to_string(w) + " has no label");
      e.tree.labels[w] = vocab.labels.name(id);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace stackptr
