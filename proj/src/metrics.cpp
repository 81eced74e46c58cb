#include "stackptr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "json.hpp"
#include "stackptr/error.hpp"
#include "stackptr/tree_oracle.hpp"

namespace stackptr {

using nlohmann::json;

namespace {

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

void check_aligned(const TreebankEntry& g, const TreebankEntry& p, std::size_t index) {
  const std::string where = "sentence " + std::to_string(index + 1);
  if (g.sentence.words.size() != p.sentence.words.size()) {
    throw DataError(where + ": gold has " + std::to_string(g.sentence.size()) + " tokens, prediction has " +
                    std::to_string(p.sentence.size()));
  }
  for (std::size_t i = 1; i < g.sentence.words.size(); ++i) {
    if (g.sentence.words[i] != p.sentence.words[i]) {
      throw DataError(where + ", token " + std::to_string(i) + ": \"" + g.sentence.words[i] + "\" vs \"" +
                      p.sentence.words[i] + "\"");
    }
  }
  if (g.tree.heads.size() != g.sentence.words.size() || p.tree.heads.size() != p.sentence.words.size()) {
    throw DataError(where + ": head column does not cover every token");
  }
}

void check_corpora(const std::vector<TreebankEntry>& gold, const std::vector<TreebankEntry>& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                    std::to_string(pred.size()));
  }
  for (std::size_t s = 0; s < gold.size(); ++s) check_aligned(gold[s], pred[s], s);
}

void check_bounds(const std::vector<int>& bounds, const char* name) {
  if (bounds.empty() || bounds.front() != 1) {
    throw std::invalid_argument(std::string("bins.") + name + ": first lower bound must be 1");
  }
  for (std::size_t i = 1; i < bounds.size(); ++i) {
    if (bounds[i] <= bounds[i - 1]) {
      throw std::invalid_argument(std::string("bins.") + name + ": bounds must increase strictly");
    }
  }
}

std::string bounds_string(const std::vector<int>& bounds) {
  std::string s;
  for (std::size_t i = 0; i < bounds.size(); ++i) s += (i ? "," : "") + std::to_string(bounds[i]);
  return s;
}

json pr_json(const std::vector<PrecisionRecallBin>& bins) {
  json rows = json::array();
  for (const auto& b : bins) {
    rows.push_back({{"bin", b.label},
                    {"predicted", b.predicted},
                    {"predicted_correct", b.predicted_correct},
                    {"gold", b.gold},
                    {"gold_correct", b.gold_correct},
                    {"precision", std::stod(format_percent(b.precision))},
                    {"recall", std::stod(format_percent(b.recall))}});
  }
  return rows;
}

std::string emit_pr(const std::vector<PrecisionRecallBin>& bins, bool empty_corpus, const std::string& header_note,
                    TableFormat format, const char* name) {
  if (format == TableFormat::json) {
    json j;
    j["table"] = name;
    j["bins"] = header_note;
    j["rows"] = empty_corpus ? json::array() : pr_json(bins);
    return j.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "# " << name << " bins=" << header_note << "\n";
  out << "bin\tpredicted\tpredicted_correct\tgold\tgold_correct\tprecision\trecall\n";
  if (empty_corpus) return out.str();
  for (const auto& b : bins) {
    out << b.label << '\t' << b.predicted << '\t' << b.predicted_correct << '\t' << b.gold << '\t' << b.gold_correct
        << '\t' << format_percent(b.precision) << '\t' << format_percent(b.recall) << '\n';
  }
  return out.str();
}

bool breakdown_empty(const ErrorBreakdown& b) {
  for (const auto& bin : b.sentence_length) {
    if (bin.sentences != 0) return false;
  }
  return true;
}

json report_json(const EvalReport& r) {
  return {{"policy", punct_policy_name(r.policy)},
          {"punct_tags", r.punct_tags},
          {"sentences", r.sentences},
          {"tokens", r.tokens},
          {"correct_heads", r.correct_heads},
          {"correct_labeled", r.correct_labeled},
          {"complete_unlabeled", r.complete_unlabeled},
          {"complete_labeled", r.complete_labeled},
          {"correct_roots", r.correct_roots},
          {"uas", std::stod(format_percent(r.uas))},
          {"las", std::stod(format_percent(r.las))},
          {"ucm", std::stod(format_percent(r.ucm))},
          {"lcm", std::stod(format_percent(r.lcm))},
          {"ra", std::stod(format_percent(r.ra))}};
}

const char* kReportHeader = "tokens\tsentences\tUAS\tLAS\tUCM\tLCM\tRA";

std::string report_row(const EvalReport& r) {
  return std::to_string(r.tokens) + '\t' + std::to_string(r.sentences) + '\t' + format_percent(r.uas) + '\t' +
         format_percent(r.las) + '\t' + format_percent(r.ucm) + '\t' + format_percent(r.lcm) + '\t' +
         format_percent(r.ra);
}

}  // namespace

std::string format_percent(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

EvalReport evaluate(const std::vector<TreebankEntry>& gold, const std::vector<TreebankEntry>& pred,
                    PunctPolicy policy) {
  check_corpora(gold, pred);
  EvalReport r;
  r.policy = policy;
  if (policy == PunctPolicy::ptb_ctb) r.punct_tags = default_punct_tags();
  r.sentences = gold.size();
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& g = gold[s];
    const auto& p = pred[s];
    const std::vector<bool> punct = punct_mask(g.sentence, policy);
    bool complete = true, complete_labeled = true;
    std::set<std::size_t> gold_roots, pred_roots;
    for (std::size_t i = 1; i < g.tree.heads.size(); ++i) {
      if (punct[i]) continue;
      ++r.tokens;
      const bool head_ok = g.tree.heads[i] == p.tree.heads[i];
      const bool label_ok = head_ok && g.tree.labels[i] == p.tree.labels[i];
      r.correct_heads += head_ok;
      r.correct_labeled += label_ok;
      complete = complete && head_ok;
      complete_labeled = complete_labeled && label_ok;
      if (g.tree.heads[i] == 0) gold_roots.insert(i);
      if (p.tree.heads[i] == 0) pred_roots.insert(i);
    }
    r.complete_unlabeled += complete;
    r.complete_labeled += complete_labeled;
    r.correct_roots += gold_roots == pred_roots;
  }
  r.uas = percent(r.correct_heads, r.tokens);
  r.las = percent(r.correct_labeled, r.tokens);
  r.ucm = percent(r.complete_unlabeled, r.sentences);
  r.lcm = percent(r.complete_labeled, r.sentences);
  r.ra = percent(r.correct_roots, r.sentences);
  return r;
}

BinConfig bin_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("bins: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("bins: expected a JSON object");
  BinConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::vector<int>* target = nullptr;
    if (it.key() == "sentence_length") target = &c.sentence_length;
    else if (it.key() == "dependency_length") target = &c.dependency_length;
    else if (it.key() == "root_distance") target = &c.root_distance;
    else throw std::invalid_argument("bins: unknown key \"" + it.key() + "\"");
    try {
      *target = it.value().get<std::vector<int>>();
    } catch (const json::exception&) {
      throw std::invalid_argument("bins." + it.key() + ": expected a list of integers");
    }
  }
  check_bounds(c.sentence_length, "sentence_length");
  check_bounds(c.dependency_length, "dependency_length");
  check_bounds(c.root_distance, "root_distance");
  return c;
}

std::string bin_label(const std::vector<int>& bounds, std::size_t bin) {
  const int lo = bounds.at(bin);
  if (bin + 1 == bounds.size()) return std::to_string(lo) + "+";
  const int hi = bounds[bin + 1] - 1;
  return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
}

std::size_t bin_index(const std::vector<int>& bounds, int value) {
  std::size_t bin = 0;
  while (bin + 1 < bounds.size() && value >= bounds[bin + 1]) ++bin;
  return bin;
}

ErrorBreakdown breakdown(const std::vector<TreebankEntry>& gold, const std::vector<TreebankEntry>& pred,
                         PunctPolicy policy, const BinConfig& bins) {
  check_bounds(bins.sentence_length, "sentence_length");
  check_bounds(bins.dependency_length, "dependency_length");
  check_bounds(bins.root_distance, "root_distance");
  check_corpora(gold, pred);
  ErrorBreakdown b;
  b.policy = policy;
  b.bins = bins;
  for (std::size_t i = 0; i < bins.sentence_length.size(); ++i) {
    b.sentence_length.push_back({bin_label(bins.sentence_length, i)});
  }
  for (std::size_t i = 0; i < bins.dependency_length.size(); ++i) {
    b.dependency_length.push_back({bin_label(bins.dependency_length, i)});
  }
  for (std::size_t i = 0; i < bins.root_distance.size(); ++i) {
    b.root_distance.push_back({bin_label(bins.root_distance, i)});
  }

  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& g = gold[s].tree;
    const auto& p = pred[s].tree;
    if (auto v = validate(p.heads)) {
      throw DataError("sentence " + std::to_string(s + 1) + ": predicted tree invalid at word " +
                      std::to_string(v->index) + ": " + v->message);
    }
    const std::vector<bool> punct = punct_mask(gold[s].sentence, policy);
    const std::size_t n = gold[s].sentence.size();
    AccuracyBin& sl = b.sentence_length[bin_index(bins.sentence_length, static_cast<int>(n))];
    ++sl.sentences;
    const std::vector<int> gold_depth = depths(g.heads);
    const std::vector<int> pred_depth = depths(p.heads);
    for (std::size_t i = 1; i <= n; ++i) {
      if (punct[i]) continue;
      const bool head_ok = g.heads[i] == p.heads[i];
      ++sl.tokens;
      sl.correct_heads += head_ok;
      sl.correct_labeled += head_ok && g.labels[i] == p.labels[i];

      auto length = [&](int head) { return head == 0 ? static_cast<int>(i) : std::abs(head - static_cast<int>(i)); };
      auto& dp = b.dependency_length[bin_index(bins.dependency_length, length(p.heads[i]))];
      ++dp.predicted;
      dp.predicted_correct += head_ok;
      auto& dg = b.dependency_length[bin_index(bins.dependency_length, length(g.heads[i]))];
      ++dg.gold;
      dg.gold_correct += head_ok;

      auto& rp = b.root_distance[bin_index(bins.root_distance, pred_depth[i])];
      ++rp.predicted;
      rp.predicted_correct += head_ok;
      auto& rg = b.root_distance[bin_index(bins.root_distance, gold_depth[i])];
      ++rg.gold;
      rg.gold_correct += head_ok;
    }
  }
  for (auto& bin : b.sentence_length) {
    bin.uas = percent(bin.correct_heads, bin.tokens);
    bin.las = percent(bin.correct_labeled, bin.tokens);
  }
  for (auto* table : {&b.dependency_length, &b.root_distance}) {
    for (auto& bin : *table) {
      bin.precision = percent(bin.predicted_correct, bin.predicted);
      bin.recall = percent(bin.gold_correct, bin.gold);
    }
  }
  return b;
}

std::string emit_report(const EvalReport& report, TableFormat format) {
  if (format == TableFormat::json) return report_json(report).dump(2) + "\n";
  std::string out = std::string("# policy=") + punct_policy_name(report.policy) + "\n" + kReportHeader + "\n";
  if (report.sentences != 0) out += report_row(report) + "\n";
  return out;
}

std::string emit_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows, TableFormat format) {
  if (format == TableFormat::json) {
    json j = json::array();
    for (const auto& [name, r] : rows) {
      json entry = report_json(r);
      entry["name"] = name;
      j.push_back(std::move(entry));
    }
    return j.dump(2) + "\n";
  }
  std::string out = std::string("name\tpolicy\t") + kReportHeader + "\n";
  for (const auto& [name, r] : rows) out += name + '\t' + punct_policy_name(r.policy) + '\t' + report_row(r) + "\n";
  return out;
}

EvalReport parse_report_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.policy = parse_punct_policy(j.at("policy").get<std::string>());
    r.punct_tags = j.value("punct_tags", std::vector<std::string>{});
    r.sentences = j.at("sentences").get<std::size_t>();
    r.tokens = j.at("tokens").get<std::size_t>();
    r.correct_heads = j.value("correct_heads", std::size_t{0});
    r.correct_labeled = j.value("correct_labeled", std::size_t{0});
    r.complete_unlabeled = j.value("complete_unlabeled", std::size_t{0});
    r.complete_labeled = j.value("complete_labeled", std::size_t{0});
    r.correct_roots = j.value("correct_roots", std::size_t{0});
    r.uas = j.at("uas").get<double>();
    r.las = j.at("las").get<double>();
    r.ucm = j.at("ucm").get<double>();
    r.lcm = j.at("lcm").get<double>();
    r.ra = j.at("ra").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

std::string emit_sentence_length(const ErrorBreakdown& b, TableFormat format) {
  const bool empty = breakdown_empty(b);
  const std::string note = bounds_string(b.bins.sentence_length);
  if (format == TableFormat::json) {
    json rows = json::array();
    if (!empty) {
      for (const auto& bin : b.sentence_length) {
        rows.push_back({{"bin", bin.label},
                        {"sentences", bin.sentences},
                        {"tokens", bin.tokens},
                        {"correct_heads", bin.correct_heads},
                        {"correct_labeled", bin.correct_labeled},
                        {"uas", std::stod(format_percent(bin.uas))},
                        {"las", std::stod(format_percent(bin.las))}});
      }
    }
    json j{{"table", "sentence_length"}, {"bins", note}, {"rows", rows}};
    return j.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "# sentence_length bins=" << note << "\n";
  out << "bin\tsentences\ttokens\tcorrect_heads\tcorrect_labeled\tuas\tlas\n";
  if (empty) return out.str();
  for (const auto& bin : b.sentence_length) {
    out << bin.label << '\t' << bin.sentences << '\t' << bin.tokens << '\t' << bin.correct_heads << '\t'
        << bin.correct_labeled << '\t' << format_percent(bin.uas) << '\t' << format_percent(bin.las) << '\n';
  }
  return out.str();
}

std::string emit_dependency_length(const ErrorBreakdown& b, TableFormat format) {
  return emit_pr(b.dependency_length, breakdown_empty(b), bounds_string(b.bins.dependency_length), format,
                 "dependency_length");
}

std::string emit_root_distance(const ErrorBreakdown& b, TableFormat format) {
  return emit_pr(b.root_distance, breakdown_empty(b), bounds_string(b.bins.root_distance), format,
                 "root_distance");
}

std::vector<MetricSummary> aggregate(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw DataError("aggregate: no reports given");
  const std::vector<std::pair<std::string, double EvalReport::*>> metrics{
      {"uas", &EvalReport::uas}, {"las", &EvalReport::las}, {"ucm", &EvalReport::ucm},
      {"lcm", &EvalReport::lcm}, {"ra", &EvalReport::ra}};
  std::vector<MetricSummary> out;
  const double k = static_cast<double>(reports.size());
  for (const auto& [name, field] : metrics) {
    MetricSummary m;
    m.metric = name;
    for (const auto& r : reports) m.mean += r.*field;
    m.mean /= k;
    if (reports.size() > 1) {
      double ss = 0.0;
      for (const auto& r : reports) ss += (r.*field - m.mean) * (r.*field - m.mean);
      m.stddev = std::sqrt(ss / (k - 1.0));
      m.has_stddev = true;
    }
    out.push_back(m);
  }
  return out;
}

std::string emit_aggregate(const std::vector<MetricSummary>& summary, std::size_t runs, TableFormat format) {
  if (format == TableFormat::json) {
    json j;
    j["runs"] = runs;
    for (const auto& m : summary) {
      json entry{{"mean", m.mean}};
      if (m.has_stddev) entry["stddev"] = m.stddev;
      j[m.metric] = entry;
    }
    return j.dump(2) + "\n";
  }
  std::string out = "metric\tmean\tstddev\n";
  for (const auto& m : summary) {
    out += m.metric + '\t' + format_percent(m.mean) + '\t' + (m.has_stddev ? format_percent(m.stddev) : "") + "\n";
  }
  return out;
}

}  // namespace stackptr
