#pragma once

// Constrained beam search for the stack-pointer parser and batch parsing for
// any model.

#include <vector>

#include "stackptr/model.hpp"
#include "stackptr/stackptr_model.hpp"

namespace stackptr {

/// One beam search over action sequences. Live items are expanded with every
/// legal target; the k best by accumulated arc log-probability survive
/// (ties: earlier item, then lower target index). Items complete when the
/// root pops; the best complete item wins. Labels are the per-arc argmax of
/// the label classifier and do not affect the search.
struct BeamOutcome {
  ParseResult result;
  // True when no pruned candidate scored above the result, which proves the
  // result optimal over all action sequences.
  bool exact = false;
};
BeamOutcome beam_search(const StackPointerModel& model, const EncodedSentence& s, std::size_t beam,
                        bool single_root);

/// beam_search with options.beam; with options.monotone, the best result over
/// widths 1..beam (the sweep stops early at the first exact width).
ParseResult decode(const StackPointerModel& model, const EncodedSentence& s, const DecodeOptions& options);

/// Parses sentences on `workers` threads sharing the read-only model.
/// Output order equals input order.
std::vector<ParseResult> batch_parse(const Model& model, const std::vector<EncodedSentence>& sentences,
                                     const DecodeOptions& options, std::size_t workers);

/// Applies parse results to the input sentences to form output records.
std::vector<TreebankEntry> to_entries(const Vocabulary& vocab, const std::vector<Sentence>& sentences,
                                      const std::vector<ParseResult>& results);

}  // namespace stackptr
