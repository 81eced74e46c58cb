#pragma once

// Attachment scores, structural error breakdowns and their table formats.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stackptr/treebank.hpp"

namespace stackptr {

/// Corpus-level scores as percentages, plus the raw counts behind them.
/// Only scoring (non-punctuation) tokens count when a policy is active.
struct EvalReport {
  PunctPolicy policy = PunctPolicy::ud;
  std::vector<std::string> punct_tags;  // tag set consulted by ptb_ctb
  std::size_t sentences = 0;
  std::size_t tokens = 0;  // scoring tokens
  std::size_t correct_heads = 0;
  std::size_t correct_labeled = 0;
  std::size_t complete_unlabeled = 0;
  std::size_t complete_labeled = 0;
  std::size_t correct_roots = 0;
  double uas = 0.0;
  double las = 0.0;
  double ucm = 0.0;
  double lcm = 0.0;
  double ra = 0.0;
};

/// Gold and predicted corpora must hold the same sentences with the same
/// tokens; a mismatch throws DataError naming the sentence. RA counts a
/// sentence as correct when its set of scoring words attached to the root
/// matches the gold set exactly.
EvalReport evaluate(const std::vector<TreebankEntry>& gold, const std::vector<TreebankEntry>& pred,
                    PunctPolicy policy);

/// Lower bounds of consecutive bins; the last bin is open-ended. The first
/// bound must be 1.
struct BinConfig {
  std::vector<int> sentence_length{1, 11, 21, 31, 41};
  std::vector<int> dependency_length{1, 2, 3, 4, 5, 6, 7};
  std::vector<int> root_distance{1, 2, 3, 4, 5, 6, 7};
};

/// Accepts keys sentence_length, dependency_length and root_distance.
BinConfig bin_config_from_json(std::string_view text);
std::string bin_label(const std::vector<int>& bounds, std::size_t bin);
std::size_t bin_index(const std::vector<int>& bounds, int value);

struct AccuracyBin {
  std::string label;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t correct_heads = 0;
  std::size_t correct_labeled = 0;
  double uas = 0.0;
  double las = 0.0;
};

/// Precision over predicted arcs and recall over gold arcs that fall in a
/// bin; an arc is correct when its child's predicted head equals the gold head.
struct PrecisionRecallBin {
  std::string label;
  std::size_t predicted = 0;
  std::size_t predicted_correct = 0;
  std::size_t gold = 0;
  std::size_t gold_correct = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct ErrorBreakdown {
  PunctPolicy policy = PunctPolicy::ud;
  BinConfig bins;
  std::vector<AccuracyBin> sentence_length;
  std::vector<PrecisionRecallBin> dependency_length;  // |head - child|; root arcs use the child index
  std::vector<PrecisionRecallBin> root_distance;      // depth of the child below the root
};

ErrorBreakdown breakdown(const std::vector<TreebankEntry>& gold, const std::vector<TreebankEntry>& pred,
                         PunctPolicy policy, const BinConfig& bins = {});

enum class TableFormat { tsv, json };

/// Percentages are printed with two decimals. Column order is fixed.
std::string emit_report(const EvalReport& report, TableFormat format);
/// One row per named report (e.g. gold / pred / none POS runs).
std::string emit_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows, TableFormat format);
EvalReport parse_report_json(std::string_view text);

std::string emit_sentence_length(const ErrorBreakdown& b, TableFormat format);
std::string emit_dependency_length(const ErrorBreakdown& b, TableFormat format);
std::string emit_root_distance(const ErrorBreakdown& b, TableFormat format);

struct MetricSummary {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  bool has_stddev = false;  // false for a single run
};

/// Mean and sample standard deviation of UAS, LAS, UCM, LCM and RA.
std::vector<MetricSummary> aggregate(const std::vector<EvalReport>& reports);
std::string emit_aggregate(const std::vector<MetricSummary>& summary, std::size_t runs, TableFormat format);

/// Formats a percentage with two decimals.
std::string format_percent(double value);

}  // namespace stackptr
