// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [--criterion N]...

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "stackptr/cli.hpp"
#include "stackptr/inference.hpp"
#include "stackptr/metrics.hpp"
#include "stackptr/mst.hpp"
#include "stackptr/training.hpp"
#include "test_support.hpp"

namespace stackptr {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Every parameter entry must satisfy relative error < 1e-4, or an absolute
// error below 1e-9 (the central-difference noise floor for step 1e-5).
Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const Vocabulary vocab = testing::make_vocab();
  std::mt19937_64 rng(2018);
  const Sentence sentence = testing::make_sentence(3);
  const GoldTree gold = testing::make_gold(vocab, heads_from_words({2, 0, 2}), rng);
  std::ostringstream detail;
  bool pass = true;
  auto check = [&](Model& model, const std::string& name) {
    testing::randomize(model.params(), rng, 0.5);
    const EncodedSentence s = encode(vocab, sentence);
    const auto r = testing::check_gradients(
        model.params(), [&](ag::Graph& g) { return model.loss(g, s, gold, nn::Mode::eval); }, 1e-5, 1e-4, 1e-9);
    pass = pass && r.failures == 0 && r.checked > 0;
    detail << name << " " << r.checked << " entries " << r.failures << " failures";
    if (r.failures) detail << " (worst " << r.worst_where << ")";
    detail << "; ";
  };
  for (Variant v : {Variant::org, Variant::gpar, Variant::sib, Variant::full}) {
    ModelConfig c = testing::tiny_config(4);
    c.variant = v;
    StackPointerModel model(c, vocab);
    check(model, variant_name(v));
  }
  BiaffineModel biaf(testing::tiny_config(4), vocab);
  check(biaf, "biaf");
  const double t = seconds_since(t0);
  detail << fmt("%.2fs", t);
  return {pass && t < 10.0, detail.str()};
}

Outcome oracle_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2018);
  std::uniform_int_distribution<std::size_t> len(1, 10);
  std::size_t ok = 0, non_projective = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    const auto heads = testing::random_tree(n, rng);
    for (std::size_t c = 1; c <= n; ++c) {
      const int h = heads[c];
      const std::size_t lo = std::min<std::size_t>(c, static_cast<std::size_t>(h));
      const std::size_t hi = std::max<std::size_t>(c, static_cast<std::size_t>(h));
      bool crossing = false;
      for (std::size_t d = lo + 1; d < hi; ++d) {
        const std::size_t hd = static_cast<std::size_t>(heads[d]);
        if (hd < lo || hd > hi) crossing = true;
      }
      if (crossing) {
        ++non_projective;
        break;
      }
    }
    const auto seq = oracle(heads);
    if (seq.actions.size() == 2 * n + 1 && replay(seq.actions, n) == heads) ++ok;
  }
  const double t = seconds_since(t0);
  return {ok == 1000 && non_projective > 0 && t < 5.0,
          std::to_string(ok) + "/1000 round trips, " + std::to_string(non_projective) + " with crossing arcs, " +
              fmt("%.2fs", t)};
}

Outcome exhaustive_equivalence() {
  const auto t0 = Clock::now();
  const Vocabulary vocab = testing::make_vocab();
  std::size_t ok = 0;
  std::string first_failure;
  for (int m = 0; m < 200; ++m) {
    StackPointerModel model(testing::tiny_config(8, 100 + static_cast<std::uint64_t>(m)), vocab);
    std::mt19937_64 rng(static_cast<std::uint64_t>(m));
    testing::randomize(model.params(), rng, 1.0);
    const std::size_t n = 1 + static_cast<std::size_t>(m) % 4;
    const EncodedSentence s = encode(vocab, testing::make_sentence(n, static_cast<std::uint64_t>(m)));
    const auto seqs = testing::enumerate_sequences(n);
    ag::Graph g;
    const SentenceCache cache = model.prepare(g, s, nn::Mode::eval);
    double best = -INFINITY;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      const double lp = g.scalar(model.sequence_log_prob(g, cache, seqs[i]));
      if (lp > best) {
        best = lp;
        best_index = i;
      }
    }
    const ParseResult r = decode(model, s, {256, false, true});
    if (r.actions == seqs[best_index] && std::abs(r.log_prob - best) <= 1e-9) {
      ++ok;
    } else if (first_failure.empty()) {
      first_failure = " first failure model " + std::to_string(m);
    }
  }
  const double t = seconds_since(t0);
  return {ok == 200 && t < 60.0, std::to_string(ok) + "/200 match enumeration, " + fmt("%.2fs", t) + first_failure};
}

Outcome validity_fuzzing() {
  const auto t0 = Clock::now();
  const Vocabulary vocab = testing::make_vocab();
  std::size_t ok = 0;
  for (int m = 0; m < 1000; ++m) {
    StackPointerModel model(testing::tiny_config(4, 1000 + static_cast<std::uint64_t>(m)), vocab);
    std::mt19937_64 rng(static_cast<std::uint64_t>(m));
    testing::randomize(model.params(), rng, 1.0 + m % 5);
    const std::size_t n = 1 + static_cast<std::size_t>(m) % 12;
    const EncodedSentence s = encode(vocab, testing::make_sentence(n, static_cast<std::uint64_t>(m)));
    const bool single_root = m % 2 == 1;
    const ParseResult r = decode(model, s, {1 + static_cast<std::size_t>(m) % 5, single_root, true});
    std::vector<int> targeted(n + 1, 0);
    for (const auto& a : r.actions) {
      if (!a.is_pop()) ++targeted[static_cast<std::size_t>(a.child)];
    }
    bool good = !validate(r.heads).has_value() && r.heads.size() == n + 1;
    for (std::size_t w = 1; w <= n; ++w) good = good && targeted[w] == 1;
    if (single_root) good = good && std::count(r.heads.begin() + 1, r.heads.end(), 0) == 1;
    ok += good;
  }
  const double t = seconds_since(t0);
  return {ok == 1000 && t < 60.0, std::to_string(ok) + "/1000 valid, " + fmt("%.2fs", t)};
}

Outcome beam_monotonicity() {
  const auto t0 = Clock::now();
  const Vocabulary vocab = testing::make_vocab();
  std::size_t violations = 0;
  for (int m = 0; m < 100; ++m) {
    StackPointerModel model(testing::tiny_config(16, 500 + static_cast<std::uint64_t>(m)), vocab);
    std::mt19937_64 rng(static_cast<std::uint64_t>(m));
    testing::randomize(model.params(), rng, 1.0);
    const EncodedSentence s =
        encode(vocab, testing::make_sentence(5 + static_cast<std::size_t>(m) % 8, static_cast<std::uint64_t>(m)));
    const double p1 = decode(model, s, {1}).log_prob;
    const double p5 = decode(model, s, {5}).log_prob;
    const double p10 = decode(model, s, {10}).log_prob;
    violations += (p5 < p1) || (p10 < p5);
  }
  return {violations == 0, std::to_string(violations) + "/100 violations, " + fmt("%.2fs", seconds_since(t0))};
}

Outcome cle_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-10, 10);
  std::size_t ok = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial) % 5;
    std::vector<std::vector<double>> m(n + 1, std::vector<double>(n + 1));
    for (auto& row : m) {
      for (double& x : row) x = u(rng);
    }
    const auto heads = mst_decode(m);
    ok += !validate(heads).has_value() && tree_score(m, heads) == testing::brute_force_best(m);
  }
  const double t = seconds_since(t0);
  return {ok == 2000 && t < 30.0, std::to_string(ok) + "/2000 exact, " + fmt("%.2fs", t)};
}

Outcome overfit() {
  const auto t0 = Clock::now();
  const auto data = read_conll_file(testing::data_path("toy20.conllu"), ConllFormat::conllu);
  ModelConfig c;
  c.word_dim = 32;
  c.char_dim = 16;
  c.pos_dim = 16;
  c.cnn_filters = 16;
  c.encoder_layers = 1;
  c.encoder_hidden = 64;
  c.decoder_hidden = 64;
  c.arc_mlp = 64;
  c.label_mlp = 32;
  c.dropout_embedding = c.dropout_recurrent = c.dropout_layer = 0.0;
  c.batch_size = 4;
  c.epochs = 200;
  c.seed = 1;
  std::ostringstream detail;
  bool pass = true;
  for (ModelKind kind : {ModelKind::stackptr, ModelKind::biaf}) {
    const TrainResult r = train(kind, c, data, {});
    std::vector<EncodedSentence> encoded;
    std::vector<Sentence> sentences;
    for (const auto& e : data) {
      encoded.push_back(encode(r.model->vocab(), e.sentence));
      sentences.push_back(e.sentence);
    }
    const auto parsed = batch_parse(*r.model, encoded, {1, false, true}, 1);
    const EvalReport rep = evaluate(data, to_entries(r.model->vocab(), sentences, parsed), PunctPolicy::none);
    pass = pass && rep.uas >= 99.0 && rep.ucm == 100.0;
    detail << model_kind_name(kind) << " UAS " << format_percent(rep.uas) << " UCM " << format_percent(rep.ucm)
           << " (epoch " << r.best_epoch << "); ";
  }
  const double t = seconds_since(t0);
  detail << fmt("%.1fs", t);
  return {pass && t < 600.0, detail.str()};
}

Outcome variant_ordering() {
  const auto t0 = Clock::now();
  const auto train_set = read_conll_file(testing::data_path("synth300_train.conllu"), ConllFormat::conllu);
  const auto dev_set = read_conll_file(testing::data_path("synth300_dev.conllu"), ConllFormat::conllu);
  std::ostringstream detail;
  std::vector<double> means;
  for (Variant v : {Variant::org, Variant::sib, Variant::full}) {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      ModelConfig c;
      c.word_dim = 32;
      c.char_dim = 16;
      c.pos_dim = 16;
      c.cnn_filters = 16;
      c.encoder_layers = 1;
      c.encoder_hidden = 64;
      c.decoder_hidden = 64;
      c.arc_mlp = 64;
      c.label_mlp = 32;
      c.batch_size = 16;
      c.epochs = 60;
      c.seed = seed;
      c.variant = v;
      sum += train(ModelKind::stackptr, c, train_set, dev_set).best_dev_uas;
    }
    means.push_back(sum / 3.0);
    detail << variant_name(v) << " " << format_percent(means.back()) << "; ";
  }
  const double t = seconds_since(t0);
  detail << "mean dev UAS over 3 seeds, " << fmt("%.1fs", t);
  const bool pass = means[1] >= means[0] - 0.5 && means[2] >= means[0] - 0.5 && t < 1800.0;
  return {pass, detail.str()};
}

TreebankEntry golden_entry(const std::vector<std::string>& upos, const std::vector<int>& word_heads,
                           const std::vector<std::string>& labels) {
  TreebankEntry e;
  e.sentence.words.assign(1, kRootWord);
  e.sentence.upos.assign(1, kRootWord);
  e.sentence.xpos.assign(1, kRootWord);
  for (std::size_t i = 0; i < upos.size(); ++i) {
    e.sentence.words.push_back("w" + std::to_string(i + 1));
    e.sentence.upos.push_back(upos[i]);
    e.sentence.xpos.push_back("_");
  }
  e.tree.heads = heads_from_words(word_heads);
  e.tree.labels.assign(1, "");
  e.tree.labels.insert(e.tree.labels.end(), labels.begin(), labels.end());
  return e;
}

Outcome metrics_golden() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  auto near = [](double a, double b) { return std::abs(a - b) < 1e-9; };

  // Three sentences: a wrong head, a wrong label, an extra root.
  const TreebankEntry g1 = golden_entry({"A", "B", "C", "D"}, {2, 0, 2, 3}, {"x", "root", "y", "z"});
  TreebankEntry p1 = g1;
  p1.tree.heads[4] = 2;
  const TreebankEntry g2 = golden_entry({"A", "B"}, {0, 1}, {"root", "x"});
  TreebankEntry p2 = g2;
  p2.tree.labels[2] = "y";
  const TreebankEntry g3 = golden_entry({"A", "B", "C"}, {0, 1, 1}, {"root", "x", "y"});
  TreebankEntry p3 = g3;
  p3.tree.heads[3] = 0;
  const EvalReport r = evaluate({g1, g2, g3}, {p1, p2, p3}, PunctPolicy::none);
  expect(near(r.uas, 700.0 / 9.0), "UAS 77.78");
  expect(near(r.las, 600.0 / 9.0), "LAS 66.67");
  expect(near(r.ucm, 100.0 / 3.0), "UCM 33.33");
  expect(r.lcm == 0.0, "LCM 0");
  expect(near(r.ra, 200.0 / 3.0), "RA 66.67");

  // Ten tokens, one wrong head.
  std::vector<int> chain(10);
  for (int i = 0; i < 10; ++i) chain[static_cast<std::size_t>(i)] = i;
  const TreebankEntry c10 = golden_entry(std::vector<std::string>(10, "NOUN"), chain, std::vector<std::string>(10, "d"));
  TreebankEntry c10p = c10;
  c10p.tree.heads[6] = 3;
  const EvalReport r10 = evaluate({c10}, {c10p}, PunctPolicy::ud);
  expect(r10.uas == 90.0 && r10.ucm == 0.0, "one wrong head in ten gives UAS 90, UCM 0");

  // PUNCT and SYM tokens are excluded under ud.
  const TreebankEntry gp =
      golden_entry({"PRON", "VERB", "SYM", "PUNCT"}, {2, 0, 2, 2}, {"nsubj", "root", "dep", "punct"});
  TreebankEntry pp = gp;
  pp.tree.heads[3] = 1;
  pp.tree.heads[4] = 3;
  const EvalReport ud = evaluate({gp}, {pp}, PunctPolicy::ud);
  expect(ud.tokens == 2 && ud.uas == 100.0 && ud.las == 100.0 && ud.ucm == 100.0 && ud.lcm == 100.0 && ud.ra == 100.0,
         "ud excludes PUNCT and SYM");
  const EvalReport none = evaluate({gp}, {pp}, PunctPolicy::none);
  expect(none.tokens == 4 && none.uas == 50.0, "none scores every token");

  const auto data = read_conll_file(testing::data_path("toy20.conllu"), ConllFormat::conllu);
  const EvalReport self = evaluate(data, data, PunctPolicy::ud);
  expect(self.uas == 100.0 && self.las == 100.0 && self.ucm == 100.0 && self.lcm == 100.0 && self.ra == 100.0,
         "gold against itself");

  std::string detail = failures.empty() ? "all golden values reproduced" : "failed:";
  for (const auto& f : failures) detail += " [" + f + "]";
  return {failures.empty(), detail};
}

Outcome quadratic_decoding() {
  const Vocabulary vocab = testing::make_vocab();
  StackPointerModel model(testing::tiny_config(32, 1), vocab);
  std::vector<double> medians;
  std::ostringstream detail;
  for (std::size_t n : {10, 20, 40, 80}) {
    const EncodedSentence s = encode(vocab, testing::make_sentence(n));
    std::vector<double> times;
    for (int rep = 0; rep < 7; ++rep) {
      const auto t0 = Clock::now();
      decode(model, s, {1, false, true});
      times.push_back(seconds_since(t0));
    }
    std::sort(times.begin(), times.end());
    medians.push_back(times[times.size() / 2]);
    detail << "n=" << n << " " << fmt("%.2fms", medians.back() * 1e3) << "; ";
  }
  bool pass = true;
  detail << "ratios";
  for (std::size_t i = 1; i < medians.size(); ++i) {
    const double ratio = medians[i] / medians[i - 1];
    pass = pass && ratio <= 4.5;
    detail << " " << fmt("%.2f", ratio);
  }
  return {pass, detail.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the full command pipeline into `dir`.
bool pipeline(const fs::path& dir, const fs::path& config) {
  const std::string toy = testing::data_path("toy20.conllu");
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink) == cli::kExitOk; };
  fs::create_directories(dir);
  bool ok = true;
  for (const char* kind : {"stackptr", "biaf"}) {
    const fs::path out = dir / kind;
    ok = ok && run({"train", "--config", config.string(), "--train", toy, "--dev", toy, "--model", kind, "--out",
                    out.string(), "--seed", "7"});
    ok = ok && run({"parse", "--model", (out / "model.ckpt").string(), "--input", toy, "--beam", "5", "--workers", "2",
                    "--out", (out / "parsed.conllu").string()});
    ok = ok && run({"eval", "--gold", toy, "--pred", (out / "parsed.conllu").string(), "--out",
                    (out / "report.json").string()});
    ok = ok && run({"analyze", "--gold", toy, "--pred", (out / "parsed.conllu").string(), "--out",
                    (out / "analysis").string()});
  }
  ok = ok && run({"aggregate", "--reports", (dir / "stackptr" / "report.json").string(),
                  (dir / "biaf" / "report.json").string(), "--out", (dir / "summary.tsv").string()});
  return ok;
}

Outcome determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "stackptr_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  ModelConfig c = testing::tiny_config(16);
  c.epochs = 4;
  const fs::path config = root / "config.json";
  {
    std::ofstream out(config);
    out << config_to_json(c);
  }
  if (!pipeline(root / "a", config) || !pipeline(root / "b", config)) return {false, "a command failed"};
  std::size_t files = 0, differing = 0;
  std::string first;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    ++files;
    if (slurp(entry.path()) != slurp(root / "b" / rel)) {
      ++differing;
      if (first.empty()) first = " first: " + rel.string();
    }
  }
  return {files >= 15 && differing == 0, std::to_string(files) + " files compared, " + std::to_string(differing) +
                                             " differ" + first + ", " + fmt("%.1fs", seconds_since(t0))};
}

}  // namespace
}  // namespace stackptr

int main(int argc, char** argv) {
  using namespace stackptr;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"oracle round trip", oracle_round_trip},
      {"exhaustive decode equivalence", exhaustive_equivalence},
      {"validity fuzzing", validity_fuzzing},
      {"beam monotonicity", beam_monotonicity},
      {"CLE correctness", cle_correctness},
      {"overfit capability", overfit},
      {"variant ordering", variant_ordering},
      {"metrics golden tests", metrics_golden},
      {"quadratic decoding", quadratic_decoding},
      {"determinism", determinism},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      const long k = std::strtol(argv[++i], nullptr, 10);
      if (k < 1 || k > static_cast<long>(criteria.size())) {
        std::cerr << "criterion must be 1.." << criteria.size() << "\n";
        return 1;
      }
      selected.push_back(static_cast<std::size_t>(k));
    } else {
      std::cerr << "usage: acceptance [--criterion N]...\n";
      return 1;
    }
  }
  if (selected.empty()) {
    for (std::size_t k = 1; k <= criteria.size(); ++k) selected.push_back(k);
  }
  bool all = true;
  for (std::size_t k : selected) {
    Outcome o;
    try {
      o = criteria[k - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << k << " (" << criteria[k - 1].first
              << "): " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
