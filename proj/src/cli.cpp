#include "stackptr/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "stackptr/checkpoint.hpp"
#include "stackptr/error.hpp"
#include "stackptr/inference.hpp"
#include "stackptr/metrics.hpp"
#include "stackptr/training.hpp"

namespace stackptr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing " + path);
}

TableFormat format_for(const std::string& path) {
  return fs::path(path).extension() == ".tsv" ? TableFormat::tsv : TableFormat::json;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TrainArgs {
  std::string config, train, dev, model = "stackptr", out, format = "conllu";
  std::int64_t seed = -1;
};

struct ParseArgs {
  std::string model, input, out, format = "conllu";
  std::size_t beam = 1, workers = 1;
  bool single_root = false;
};

struct EvalArgs {
  std::string gold, punct = "ud", out, format = "conllu";
  std::vector<std::string> pred;
};

struct AnalyzeArgs {
  std::string gold, pred, bins, punct = "ud", out, format = "conllu";
};

struct AggregateArgs {
  std::vector<std::string> reports;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  ModelConfig config = load_config(a.config);
  if (a.seed >= 0) config.seed = static_cast<std::uint64_t>(a.seed);
  const ModelKind kind = parse_model_kind(a.model);
  const ConllFormat format = parse_conll_format(a.format);
  const auto train_set = read_conll_file(a.train, format);
  const auto dev_set = read_conll_file(a.dev, format);
  fs::create_directories(a.out);

  TrainOptions options;
  options.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << format_percent(r.train_loss) << " dev_uas " << format_percent(r.dev_uas)
        << (r.best ? " *" : "") << "\n";
  };
  TrainResult result = train(kind, config, train_set, dev_set, options);

  const fs::path dir(a.out);
  save_checkpoint(*result.model, (dir / "model.ckpt").string());
  write_file((dir / "train_log.tsv").string(), format_log(result.log));
  json manifest;
  manifest["model"] = model_kind_name(kind);
  manifest["seed"] = config.seed;
  manifest["config"] = json::parse(config_to_json(config));
  manifest["data"] = {{"train", {{"path", a.train}, {"fnv1a64", file_digest(a.train)}}},
                      {"dev", {{"path", a.dev}, {"fnv1a64", file_digest(a.dev)}}}};
  manifest["checkpoint"] = "model.ckpt";
  manifest["log"] = "train_log.tsv";
  manifest["reports"] = json::array();
  manifest["best_epoch"] = result.best_epoch;
  manifest["best_dev_uas"] = std::stod(format_percent(result.best_dev_uas));
  if (!config.embeddings.empty()) manifest["embedding_coverage"] = result.embedding_coverage;
  write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  out << "best epoch " << result.best_epoch << " dev_uas " << format_percent(result.best_dev_uas) << "\n";
  return kExitOk;
}

int cmd_parse(const ParseArgs& a, std::ostream& err) {
  if (a.beam == 0) throw std::invalid_argument("--beam must be at least 1");
  const auto model = load_checkpoint(a.model);
  const auto input = read_conll_file(a.input, parse_conll_format(a.format), ReadMode::tokens);
  std::vector<EncodedSentence> encoded;
  std::vector<Sentence> sentences;
  for (const auto& e : input) {
    encoded.push_back(encode(model->vocab(), e.sentence));
    sentences.push_back(e.sentence);
  }
  const DecodeOptions options{a.beam, a.single_root};
  const auto results = batch_parse(*model, encoded, options, a.workers);
  double total = 0.0;
  std::vector<std::string> comments;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (auto v = validate(results[i].heads)) {
      throw InvariantError("parse produced an invalid tree for sentence " + std::to_string(i + 1) + ": " +
                           v->message);
    }
    total += results[i].log_prob;
    comments.push_back("log_prob = " + format_double(results[i].log_prob));
  }
  const auto entries = to_entries(model->vocab(), sentences, results);
  write_file(a.out, write_conll(entries, parse_conll_format(a.format), comments));
  err << "total_log_prob\t" << format_double(total) << "\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a) {
  const ConllFormat format = parse_conll_format(a.format);
  const PunctPolicy policy = parse_punct_policy(a.punct);
  const auto gold = read_conll_file(a.gold, format);
  std::vector<std::pair<std::string, EvalReport>> rows;
  for (const auto& path : a.pred) {
    const auto pred = read_conll_file(path, format);
    try {
      rows.emplace_back(fs::path(path).stem().string(), evaluate(gold, pred, policy));
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  const TableFormat table = format_for(a.out);
  write_file(a.out, rows.size() == 1 ? emit_report(rows.front().second, table) : emit_report_table(rows, table));
  return kExitOk;
}

int cmd_analyze(const AnalyzeArgs& a) {
  const ConllFormat format = parse_conll_format(a.format);
  BinConfig bins;
  if (!a.bins.empty()) bins = bin_config_from_json(read_file(a.bins));
  const auto b =
      breakdown(read_conll_file(a.gold, format), read_conll_file(a.pred, format), parse_punct_policy(a.punct), bins);
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  write_file((dir / "sentence_length.tsv").string(), emit_sentence_length(b, TableFormat::tsv));
  write_file((dir / "dependency_length.tsv").string(), emit_dependency_length(b, TableFormat::tsv));
  write_file((dir / "root_distance.tsv").string(), emit_root_distance(b, TableFormat::tsv));
  return kExitOk;
}

int cmd_aggregate(const AggregateArgs& a) {
  std::vector<EvalReport> reports;
  for (const auto& path : a.reports) {
    try {
      reports.push_back(parse_report_json(read_file(path)));
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  write_file(a.out, emit_aggregate(aggregate(reports), reports.size(), format_for(a.out)));
  return kExitOk;
}

}  // namespace

std::string file_digest(const std::string& path) {
  const std::string bytes = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"stack-pointer dependency parser"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a parser and write checkpoint, log and manifest");
  train_cmd->add_option("--config", ta.config, "model config JSON")->required();
  train_cmd->add_option("--train", ta.train, "training treebank")->required();
  train_cmd->add_option("--dev", ta.dev, "development treebank")->required();
  train_cmd->add_option("--model", ta.model, "stackptr or biaf")->check(CLI::IsMember({"stackptr", "biaf"}));
  train_cmd->add_option("--out", ta.out, "output directory")->required();
  train_cmd->add_option("--seed", ta.seed, "overrides the config seed");
  train_cmd->add_option("--format", ta.format, "conllx or conllu")->check(CLI::IsMember({"conllx", "conllu"}));

  ParseArgs pa;
  auto* parse_cmd = app.add_subcommand("parse", "parse a CoNLL file with a trained model");
  parse_cmd->add_option("--model", pa.model, "checkpoint path")->required();
  parse_cmd->add_option("--input", pa.input, "CoNLL input (head columns ignored)")->required();
  parse_cmd->add_option("--beam", pa.beam, "beam size")->check(CLI::PositiveNumber);
  parse_cmd->add_option("--out", pa.out, "CoNLL output")->required();
  parse_cmd->add_option("--workers", pa.workers, "parallel workers")->check(CLI::PositiveNumber);
  parse_cmd->add_flag("--single-root", pa.single_root, "restrict the root to one child");
  parse_cmd->add_option("--format", pa.format, "conllx or conllu")->check(CLI::IsMember({"conllx", "conllu"}));

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "attachment scores (JSON, or TSV for a .tsv output)");
  eval_cmd->add_option("--gold", ea.gold, "gold treebank")->required();
  eval_cmd->add_option("--pred", ea.pred, "predicted treebank; repeat for a combined table")->required();
  eval_cmd->add_option("--punct", ea.punct, "ptb_ctb, ud or none")->check(CLI::IsMember({"ptb_ctb", "ud", "none"}));
  eval_cmd->add_option("--out", ea.out, "report path")->required();
  eval_cmd->add_option("--format", ea.format, "conllx or conllu")->check(CLI::IsMember({"conllx", "conllu"}));

  AnalyzeArgs na;
  auto* analyze_cmd = app.add_subcommand("analyze", "sentence-length, dependency-length and root-distance tables");
  analyze_cmd->add_option("--gold", na.gold, "gold treebank")->required();
  analyze_cmd->add_option("--pred", na.pred, "predicted treebank")->required();
  analyze_cmd->add_option("--bins", na.bins, "bin config JSON");
  analyze_cmd->add_option("--punct", na.punct, "ptb_ctb, ud or none")->check(CLI::IsMember({"ptb_ctb", "ud", "none"}));
  analyze_cmd->add_option("--out", na.out, "output directory")->required();
  analyze_cmd->add_option("--format", na.format, "conllx or conllu")->check(CLI::IsMember({"conllx", "conllu"}));

  AggregateArgs ga;
  auto* aggregate_cmd = app.add_subcommand("aggregate", "mean and sample stddev over eval reports");
  aggregate_cmd->add_option("--reports", ga.reports, "JSON eval reports")->required();
  aggregate_cmd->add_option("--out", ga.out, "summary path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(ta, out);
    if (*parse_cmd) return cmd_parse(pa, err);
    if (*eval_cmd) return cmd_eval(ea);
    if (*analyze_cmd) return cmd_analyze(na);
    if (*aggregate_cmd) return cmd_aggregate(ga);
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace stackptr::cli
