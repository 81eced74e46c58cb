#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stackptr/checkpoint.hpp"
#include "stackptr/error.hpp"
#include "stackptr/inference.hpp"
#include "stackptr/stackptr_model.hpp"
#include "stackptr/training.hpp"
#include "test_support.hpp"

namespace stackptr {
namespace {

using ag::Graph;

std::vector<TreebankEntry> toy(std::size_t count) {
  auto all = read_conll_file(testing::data_path("toy20.conllu"), ConllFormat::conllu);
  all.resize(std::min(count, all.size()));
  return all;
}

ModelConfig small_config(std::size_t epochs = 3) {
  ModelConfig c = testing::tiny_config(8, 5);
  c.epochs = epochs;
  c.batch_size = 2;
  return c;
}

double eval_loss(const Model& model, const TreebankEntry& e) {
  Graph g;
  return g.scalar(model.loss(g, encode(model.vocab(), e.sentence), encode_tree(model.vocab(), e.tree), nn::Mode::eval));
}

TEST(SentenceLoss, SingleWordWithZeroParams) {
  const Vocabulary vocab = testing::make_vocab();
  StackPointerModel model(testing::tiny_config(), vocab);
  testing::zero_all(model.params());
  const GoldTree gold{heads_from_words({0}), {-1, 0}};
  Graph g;
  const double loss = g.scalar(model.loss(g, encode(vocab, testing::make_sentence(1)), gold, nn::Mode::eval));
  // Legal sets along the oracle: {1} (the root cannot pop yet), {1}, {0}.
  const double arc = std::log(1.0) + std::log(1.0) + std::log(1.0);
  EXPECT_NEAR(loss, arc + std::log(static_cast<double>(vocab.labels.size())), 1e-12);
}

TEST(SentenceLoss, TwoWordsWithZeroParams) {
  const Vocabulary vocab = testing::make_vocab();
  StackPointerModel model(testing::tiny_config(), vocab);
  testing::zero_all(model.params());
  const GoldTree gold{heads_from_words({2, 0}), {-1, 1, 0}};
  Graph g;
  const double loss = g.scalar(model.loss(g, encode(vocab, testing::make_sentence(2)), gold, nn::Mode::eval));
  // Hand enumeration: top 0 {1,2}; top 2 {1,2}; top 1 {1}; top 2 {2}; top 0 {0}.
  const double arc = 2 * std::log(2.0);
  EXPECT_NEAR(loss, arc + 2 * std::log(static_cast<double>(vocab.labels.size())), 1e-12);
}

TEST(SentenceLoss, TermCountsFollowTheOracle) {
  const Vocabulary vocab = testing::make_vocab();
  StackPointerModel model(testing::tiny_config(), vocab);
  testing::zero_all(model.params());
  std::mt19937_64 rng(3);
  for (std::size_t n = 1; n <= 9; ++n) {
    const GoldTree gold = testing::make_gold(vocab, testing::random_tree(n, rng), rng);
    const auto seq = oracle(gold.heads);
    ASSERT_EQ(seq.actions.size(), 2 * n + 1);
    // Independent count of legal candidates per step: every unattached
    // word, plus the top itself unless it is the root with words left.
    std::vector<bool> attached(n + 1, false);
    double arc = 0.0;
    for (const auto& a : seq.actions) {
      std::size_t legal = 0;
      for (std::size_t w = 1; w <= n; ++w) legal += !attached[w];
      if (a.head != 0 || legal == 0) ++legal;
      arc += std::log(static_cast<double>(legal));
      if (!a.is_pop()) attached[static_cast<std::size_t>(a.child)] = true;
    }
    Graph g;
    const double loss = g.scalar(model.loss(g, encode(vocab, testing::make_sentence(n)), gold, nn::Mode::eval));
    EXPECT_NEAR(loss, arc + static_cast<double>(n) * std::log(static_cast<double>(vocab.labels.size())), 1e-10)
        << "n=" << n;
  }
}

TEST(SentenceLoss, FiniteForExtremeParameters) {
  const Vocabulary vocab = testing::make_vocab();
  for (ModelKind kind : {ModelKind::stackptr, ModelKind::biaf}) {
    auto model = make_model(kind, testing::tiny_config(), vocab);
    std::mt19937_64 rng(9);
    testing::randomize(model->params(), rng, 20.0);
    for (std::size_t n = 1; n <= 8; ++n) {
      const GoldTree gold = testing::make_gold(vocab, testing::random_tree(n, rng), rng);
      Graph g;
      EXPECT_TRUE(std::isfinite(g.scalar(model->loss(g, encode(vocab, testing::make_sentence(n)), gold, nn::Mode::eval))));
    }
  }
}

TEST(SentenceLoss, PeakedModelDrivesLossToZero) {
  const auto data = toy(1);
  ModelConfig c = small_config();
  c.learning_rate = 0.01;
  const Vocabulary vocab = Vocabulary::fit(data, c.pos_column);
  auto model = make_model(ModelKind::stackptr, c, vocab);
  const EncodedSentence s = encode(vocab, data[0].sentence);
  const GoldTree gold = encode_tree(vocab, data[0].tree);
  OptimState st = OptimState::init(model->params(), c.learning_rate);
  const double start = eval_loss(*model, data[0]);
  for (int step = 0; step < 300; ++step) {
    model->params().zero_grad();
    Graph g;
    g.backward(model->loss(g, s, gold, nn::Mode::eval));
    adam_step(model->params(), st, c);
  }
  EXPECT_GT(start, 10.0);
  EXPECT_LT(eval_loss(*model, data[0]), 0.05);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  ag::ParameterSet ps;
  ps.add("x", {1, 3}).value = {1, -2, 3};
  OptimState st = OptimState::init(ps, 0.001);
  adam_step(ps, st, ModelConfig{});
  EXPECT_EQ(ps[0].value, (std::vector<double>{1, -2, 3}));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ag::ParameterSet ps;
  ag::Parameter& p = ps.add("x", {1, 1});
  p.value = {0.5};
  p.grad = {1.0};
  OptimState st = OptimState::init(ps, 0.001);
  ModelConfig c;
  adam_step(ps, st, c);
  EXPECT_NEAR(p.value[0], 0.5 - 0.001 / (1.0 + c.adam_epsilon), 1e-15);
  EXPECT_NEAR(0.5 - p.value[0], 0.001, 1e-10);
}

TEST(Adam, PaddingRowIsNeverUpdated) {
  ag::ParameterSet ps;
  ag::Parameter& p = ps.add("emb", {2, 2}, true);
  p.grad = {1, 1, 1, 1};
  OptimState st = OptimState::init(ps, 0.1);
  adam_step(ps, st, ModelConfig{});
  EXPECT_EQ(p.value[0], 0.0);
  EXPECT_EQ(p.value[1], 0.0);
  EXPECT_NE(p.value[2], 0.0);
}

TEST(Clip, GlobalNormFiftyIsScaledByATenth) {
  ag::ParameterSet ps;
  ps.add("a", {1, 1}).grad = {30.0};
  ps.add("b", {1, 1}).grad = {40.0};
  EXPECT_DOUBLE_EQ(grad_norm(ps), 50.0);
  EXPECT_DOUBLE_EQ(clip_gradients(ps, 5.0), 50.0);
  EXPECT_NEAR(ps[0].grad[0], 3.0, 1e-12);
  EXPECT_NEAR(ps[1].grad[0], 4.0, 1e-12);
  EXPECT_NEAR(grad_norm(ps), 5.0, 1e-12);
  // Below the threshold nothing changes.
  EXPECT_NEAR(clip_gradients(ps, 10.0), 5.0, 1e-12);
  EXPECT_NEAR(ps[0].grad[0], 3.0, 1e-12);
}

TEST(LrSchedule, StrictlyImprovingKeepsRate) {
  ModelConfig c;
  OptimState st = OptimState::init(ag::ParameterSet{}, 0.001);
  for (double s : {50.0, 60.0, 61.0, 70.0, 80.0, 90.0, 91.0}) EXPECT_FALSE(lr_schedule(st, s, c));
  EXPECT_EQ(st.lr, 0.001);
}

TEST(LrSchedule, FivePlateauEpochsDecay) {
  ModelConfig c;
  OptimState st = OptimState::init(ag::ParameterSet{}, 0.001);
  lr_schedule(st, 80.0, c);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(lr_schedule(st, 80.0, c));
  EXPECT_TRUE(lr_schedule(st, 79.0, c));
  EXPECT_DOUBLE_EQ(st.lr, 0.00075);
  for (int i = 0; i < 5; ++i) lr_schedule(st, 10.0, c);
  EXPECT_DOUBLE_EQ(st.lr, 0.001 * 0.75 * 0.75);
  EXPECT_EQ(st.decays, 2u);
  // An improvement resets the counter.
  for (int i = 0; i < 4; ++i) lr_schedule(st, 10.0, c);
  lr_schedule(st, 99.0, c);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(lr_schedule(st, 10.0, c));
}

TEST(Train, SameSeedGivesIdenticalRuns) {
  const auto data = toy(6);
  const auto dev = toy(3);
  for (ModelKind kind : {ModelKind::stackptr, ModelKind::biaf}) {
    TrainResult a = train(kind, small_config(), data, dev);
    TrainResult b = train(kind, small_config(), data, dev);
    ASSERT_EQ(a.log.size(), 3u);
    EXPECT_EQ(format_log(a.log), format_log(b.log));
    for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
    EXPECT_EQ(serialize_checkpoint(*a.model), serialize_checkpoint(*b.model));
    ModelConfig other = small_config();
    other.seed = 6;
    TrainResult c = train(kind, other, data, dev);
    EXPECT_NE(a.log[0].train_loss, c.log[0].train_loss);
  }
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto data = toy(4);
  ModelConfig c = small_config(2);
  c.learning_rate = 0.0;
  c.dropout_embedding = c.dropout_recurrent = c.dropout_layer = 0.0;
  TrainResult r = train(ModelKind::stackptr, c, data, data);
  auto fresh = make_model(ModelKind::stackptr, c, r.model->vocab());
  ASSERT_EQ(fresh->params().size(), r.model->params().size());
  for (std::size_t i = 0; i < fresh->params().size(); ++i) {
    EXPECT_EQ(fresh->params()[i].value, r.model->params()[i].value) << fresh->params()[i].name;
  }
  EXPECT_EQ(r.log[0].train_loss, r.log[1].train_loss);
}

TEST(Train, OneEpochOnOneSentenceReducesItsLoss) {
  const auto all = toy(20);
  int violations = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::vector<TreebankEntry> one{all[seed]};
    ModelConfig c = small_config(1);
    c.seed = seed;
    c.learning_rate = 1e-3;
    const Vocabulary vocab = Vocabulary::fit(one, c.pos_column);
    auto before = make_model(ModelKind::stackptr, c, vocab);
    TrainResult r = train(ModelKind::stackptr, c, one, {});
    if (!(eval_loss(*r.model, one[0]) < eval_loss(*before, one[0]))) ++violations;
  }
  EXPECT_LE(violations, 1);
}

TEST(Train, LogFormatAndBestEpoch) {
  const auto data = toy(5);
  TrainResult r = train(ModelKind::stackptr, small_config(4), data, data);
  const std::string log = format_log(r.log);
  EXPECT_EQ(log.rfind("epoch\tlr\ttrain_loss\tdev_uas\tdev_las\tbest\n", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 5);
  double best = -1;
  std::size_t best_epoch = 0;
  for (const auto& rec : r.log) {
    if (rec.dev_uas > best) {
      best = rec.dev_uas;
      best_epoch = rec.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_dev_uas, best);
}

TEST(Train, RejectsEmptyTrainingSetAndNonFiniteLoss) {
  EXPECT_THROW(train(ModelKind::stackptr, small_config(), {}, {}), DataError);
  ModelConfig c = small_config(5);
  c.learning_rate = 1e300;
  try {
    train(ModelKind::stackptr, c, toy(4), {});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("parameter norms"), std::string::npos) << msg;
  }
}

TEST(Train, StepSeedsDiffer) {
  EXPECT_NE(step_seed(1, 1, 0), step_seed(1, 1, 1));
  EXPECT_NE(step_seed(1, 1, 0), step_seed(1, 2, 0));
  EXPECT_NE(step_seed(1, 1, 0), step_seed(2, 1, 0));
  EXPECT_EQ(step_seed(3, 4, 5), step_seed(3, 4, 5));
}

TEST(Config, JsonRoundTripIsLossless) {
  ModelConfig c;
  c.variant = Variant::sib;
  c.pos_mode = PosMode::none;
  c.pos_column = PosColumn::xpos;
  c.child_order = ChildOrder::inside_out_interleaved;
  c.encoder_hidden = 17;
  c.learning_rate = 0.1 + 0.2;  // not exactly representable in short decimal
  c.dropout_layer = 1.0 / 3.0;
  c.seed = 0xFFFFFFFFFFFFULL;
  c.single_root = true;
  c.dev_punct = PunctPolicy::ptb_ctb;
  c.embeddings = "vectors.txt";
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  EXPECT_EQ(config_from_json("{}"), ModelConfig{});
}

TEST(Config, UnknownOrIllTypedKeysRejected) {
  EXPECT_THROW(config_from_json(R"({"encoder_hiden": 4})"), std::invalid_argument);
  EXPECT_THROW(config_from_json(R"({"encoder_hidden": "four"})"), std::invalid_argument);
  EXPECT_THROW(config_from_json(R"({"variant": "best"})"), std::invalid_argument);
  EXPECT_THROW(config_from_json("not json"), std::invalid_argument);
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  const auto data = toy(4);
  for (ModelKind kind : {ModelKind::stackptr, ModelKind::biaf}) {
    TrainResult r = train(kind, small_config(1), data, {});
    const std::string bytes = serialize_checkpoint(*r.model);
    auto loaded = deserialize_checkpoint(bytes);
    EXPECT_EQ(loaded->kind(), kind);
    EXPECT_EQ(loaded->config(), r.model->config());
    EXPECT_EQ(loaded->vocab(), r.model->vocab());
    EXPECT_EQ(serialize_checkpoint(*loaded), bytes);
    for (const auto& e : data) {
      const EncodedSentence s = encode(loaded->vocab(), e.sentence);
      const ParseResult a = r.model->parse(s, {});
      const ParseResult b = loaded->parse(s, {});
      EXPECT_EQ(a.heads, b.heads);
      EXPECT_EQ(a.labels, b.labels);
      EXPECT_EQ(a.log_prob, b.log_prob);
    }
  }
}

TEST(Checkpoint, CorruptBytesRejected) {
  TrainResult r = train(ModelKind::stackptr, small_config(1), toy(2), {});
  const std::string bytes = serialize_checkpoint(*r.model);
  EXPECT_EQ(bytes.substr(0, 8), "STKPTRCK");
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), DataError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), DataError);
}

}  // namespace
}  // namespace stackptr
