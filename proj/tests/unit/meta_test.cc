#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metaadapt/core/error.h"
#include "metaadapt/eval/report.h"
#include "metaadapt/meta/baselines.h"
#include "metaadapt/meta/meta_trainer.h"
#include "metaadapt/meta/strategy.h"
#include "metaadapt/tensor/checkpoint.h"
#include "test_util.h"
#include "toy_data.h"

namespace metaadapt {
namespace {

class MetaTest : public ::testing::Test {
 protected:
  void SetUp() override {
    setup_ = toy::MakeSetup();
    base_ = std::make_unique<Model>(toy::SmallModel(setup_.vocab), toy::SmallAdapter(), 3);
  }

  // Fresh copy of the base model with the adapter trainable and a
  // non-trivial adapter so gradients reach every psi coordinate.
  Model AdapterModel(double dropout = 0.0) {
    Model m(toy::SmallModel(setup_.vocab, dropout), toy::SmallAdapter(), 3);
    m.SetParams(base_->params());
    ConfigureStrategy(m, Strategy::kM4Adapter);
    Rng rng(9);
    Snapshot psi = TakeSnapshot(m);
    for (auto& [name, t] : psi)
      for (double& v : t.data()) v += rng.Uniform(-0.1, 0.1);
    m.SetParams(psi);
    return m;
  }

  std::vector<TokenPair> Support(std::size_t i = 0) const {
    return EncodeExamples(setup_.meta_train[i].train, setup_.vocab);
  }

  toy::Setup setup_;
  std::unique_ptr<Model> base_;
};

AdamWSettings Lr(double lr) {
  AdamWSettings s;
  s.learning_rate = lr;
  return s;
}

double MaxAbsDiff(const ParamMap& a, const ParamMap& b) {
  double d = 0.0;
  for (const auto& [name, t] : a) {
    const auto& u = b.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) d = std::max(d, std::abs(t[i] - u[i]));
  }
  return d;
}

Snapshot Vec(std::vector<double> v) {
  Snapshot s;
  const std::size_t n = v.size();
  s.emplace("p", Tensor({n}, std::move(v)));
  return s;
}

// --- inner loop ---------------------------------------------------------

TEST_F(MetaTest, InnerAdaptZeroLearningRateIsFixedPoint) {
  Model m = AdapterModel();
  const Snapshot start = TakeSnapshot(m);
  Rng rng(1);
  const Snapshot out = InnerAdapt(m, start, Support(), 3, Lr(0.0), 4, rng);
  EXPECT_EQ(out, start);
}

TEST_F(MetaTest, InnerAdaptLeavesBackboneUntouched) {
  Model m = AdapterModel();
  const auto before = m.BackboneChecksum();
  Rng rng(1);
  const Snapshot out = InnerAdapt(m, TakeSnapshot(m), Support(), 3, Lr(1e-2), 4, rng);
  EXPECT_EQ(m.BackboneChecksum(), before);
  EXPECT_GT(MaxAbsDiff(out, AdapterModel().GetParams(m.TrainableNames())), 0.0);
}

TEST_F(MetaTest, InnerAdaptSingleStepMatchesManualStep) {
  Model a = AdapterModel();
  const Snapshot start = TakeSnapshot(a);
  const auto support = Support();
  Rng rng_a(5);
  const Snapshot out = InnerAdapt(a, start, support, 1, Lr(1e-2), 4, rng_a);

  Model b = AdapterModel();
  AdamW opt(b.TrainableParams(), Lr(1e-2));
  Rng rng_b(5);
  const std::vector<TokenPair> batch(support.begin(), support.begin() + 4);
  TrainStep(b, opt, batch, rng_b);
  EXPECT_EQ(out, TakeSnapshot(b));
}

TEST_F(MetaTest, InnerAdaptRejectsWrongLayoutAndEmptySupport) {
  Model m = AdapterModel();
  Rng rng(1);
  EXPECT_ERROR_KIND(InnerAdapt(m, Vec({1.0}), Support(), 1, Lr(1e-2), 4, rng), ErrorKind::kState);
  EXPECT_ERROR_KIND(InnerAdapt(m, TakeSnapshot(m), {}, 1, Lr(1e-2), 4, rng), ErrorKind::kInput);
}

TEST_F(MetaTest, InnerAdaptReportsNumericFailureWithStep) {
  Model m = AdapterModel();
  Snapshot bad = TakeSnapshot(m);
  bad.begin()->second[0] = std::nan("");
  Rng rng(1);
  try {
    InnerAdapt(m, bad, Support(), 2, Lr(1e-2), 4, rng);
    ADD_FAILURE() << "NaN parameters accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

// --- Reptile update -------------------------------------------------------

TEST(ReptileTest, HandArithmeticOracle) {
  const Snapshot out = ReptileStep(Vec({0, 0}), {Vec({1, 0}), Vec({0, 1})}, 1.0);
  EXPECT_EQ(out.at("p").storage(), (std::vector<double>{0.5, 0.5}));
}

TEST(ReptileTest, FixedPointAndEndpoint) {
  const Snapshot psi = Vec({0.3, -1.2, 4.0});
  EXPECT_EQ(ReptileStep(psi, {psi, psi, psi}, 0.7), psi);
  const Snapshot r = Vec({1.5, 2.5, -3.5});
  EXPECT_EQ(ReptileStep(psi, {r}, 1.0), r);
}

TEST(ReptileTest, StaysInConvexHull) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 5, m = 1 + rng.UniformIndex(4);
    std::vector<double> p(dim);
    for (double& v : p) v = rng.Uniform(-1, 1);
    std::vector<Snapshot> results;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> r(dim);
      for (double& v : r) v = rng.Uniform(-1, 1);
      results.push_back(Vec(r));
    }
    const double beta = rng.Uniform(0.01, 1.0);
    const Snapshot out = ReptileStep(Vec(p), results, beta);
    for (std::size_t c = 0; c < dim; ++c) {
      double lo = p[c], hi = p[c];
      for (const auto& r : results) {
        lo = std::min(lo, r.at("p")[c]);
        hi = std::max(hi, r.at("p")[c]);
      }
      EXPECT_GE(out.at("p")[c], lo - 1e-15);
      EXPECT_LE(out.at("p")[c], hi + 1e-15);
    }
  }
}

TEST(ReptileTest, LayoutMismatchAndEmptyResults) {
  EXPECT_ERROR_KIND(ReptileStep(Vec({0, 0}), {Vec({1, 0, 0})}, 1.0), ErrorKind::kState);
  Snapshot other;
  other.emplace("q", Tensor({2}, 0.0));
  EXPECT_ERROR_KIND(ReptileStep(Vec({0, 0}), {other}, 1.0), ErrorKind::kState);
  EXPECT_ERROR_KIND(ReptileStep(Vec({0, 0}), {}, 1.0), ErrorKind::kInput);
}

// --- meta-training loop ---------------------------------------------------

TEST(MetaConfigTest, Validation) {
  MetaConfig c;
  c.Validate();
  EXPECT_EQ(c.m, 8u);
  EXPECT_EQ(c.k, 3u);
  EXPECT_EQ(c.beta, 1.0);
  EXPECT_EQ(c.temperature, Temperature::Finite(1.0));
  c.beta = 0.0;
  EXPECT_ERROR_KIND(c.Validate(), ErrorKind::kConfig);
  c = MetaConfig{};
  c.k = 0;
  EXPECT_ERROR_KIND(c.Validate(), ErrorKind::kConfig);
  c = MetaConfig{};
  c.m = 0;
  EXPECT_ERROR_KIND(c.Validate(), ErrorKind::kConfig);
}

TEST(MetaConfigTest, EpochIsOnePassOfExpectedDraws) {
  MetaConfig c;  // m = 8, n + q = 12 -> 96 draws per meta-batch
  EXPECT_EQ(MetaBatchesPerEpoch(960, c), 10u);
  EXPECT_EQ(MetaBatchesPerEpoch(961, c), 11u);
  EXPECT_EQ(MetaBatchesPerEpoch(1, c), 1u);
}

TEST_F(MetaTest, SingleTaskSingleStepMatchesSequentialFineTuning) {
  // 20 meta-batches inside one epoch: 100 pooled pairs / (1 * (4 + 1)).
  std::vector<DlpDataset> tasks = {toy::Dataset(DlpId{"law", "aa", "bb"}, 100, 0, 0, 77)};
  MetaConfig cfg;
  cfg.m = 1;
  cfg.k = 1;
  cfg.beta = 1.0;
  cfg.n = 4;
  cfg.q = 1;
  cfg.epochs = 1.0;
  cfg.seed = 12;
  cfg.inner_optimizer = Lr(1e-2);
  ASSERT_EQ(MetaBatchesPerEpoch(100, cfg), 20u);

  Model meta = AdapterModel();
  const MetaTrainResult result = MetaTrain(meta, tasks, setup_.vocab, cfg);
  ASSERT_EQ(result.meta_batches, 20u);

  Model seq = AdapterModel();
  const SamplingPlan plan = MakeSamplingPlan({tasks[0].id}, std::vector<std::size_t>{100}, cfg.temperature);
  for (std::size_t b = 0; b < 20; ++b) {
    const Episode e = SampleEpisode(plan, tasks, cfg, b);
    AdamW opt(seq.TrainableParams(), cfg.inner_optimizer);
    Rng unused(0);
    TrainStep(seq, opt, EncodeExamples(e.tasks[0].support, setup_.vocab), unused);
  }
  const Snapshot expected = TakeSnapshot(seq);
  EXPECT_LE(MaxAbsDiff(result.params, expected), 1e-12);
  EXPECT_GT(MaxAbsDiff(result.params, TakeSnapshot(AdapterModel())), 1e-4);
}

MetaConfig SmallMeta() {
  MetaConfig cfg;
  cfg.m = 2;
  cfg.n = 3;
  cfg.q = 2;
  cfg.k = 2;
  cfg.epochs = 2.0;
  cfg.seed = 5;
  return cfg;
}

TEST_F(MetaTest, MetaTrainIsDeterministicAndFreezesBackbone) {
  Model a = AdapterModel(0.1);
  Model b = AdapterModel(0.1);
  const auto theta = a.BackboneChecksum();
  std::vector<MetaBatchLog> logs;
  const auto ra = MetaTrain(a, setup_.meta_train, setup_.vocab, SmallMeta(), [&](const MetaBatchLog& l) { logs.push_back(l); });
  const auto rb = MetaTrain(b, setup_.meta_train, setup_.vocab, SmallMeta());
  EXPECT_EQ(ra.params, rb.params);
  EXPECT_EQ(a.BackboneChecksum(), theta);
  EXPECT_EQ(ra.batches_per_epoch, MetaBatchesPerEpoch(4 * 24, SmallMeta()));
  EXPECT_EQ(logs.size(), ra.meta_batches);
  for (const auto& l : logs) {
    EXPECT_EQ(l.tasks.size(), 2u);
    EXPECT_NE(l.tasks[0].dlp, l.tasks[1].dlp);
    EXPECT_TRUE(std::isfinite(l.query_loss));
  }
}

TEST_F(MetaTest, MetaTrainLogLinesAreJson) {
  Model a = AdapterModel();
  MetaConfig cfg = SmallMeta();
  cfg.max_meta_batches = 2;
  std::ostringstream out;
  MetaTrain(a, setup_.meta_train, setup_.vocab, cfg, [&](const MetaBatchLog& l) { WriteMetaLogLine(out, l); });
  std::istringstream in(out.str());
  std::string line;
  int count = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("meta_batch").get<int>(), count);
    EXPECT_EQ(j.at("tasks").size(), 2u);
    ++count;
  }
  EXPECT_EQ(count, 2);
}

TEST_F(MetaTest, MetaTrainRejectsEmptyRegistry) {
  Model a = AdapterModel();
  EXPECT_ERROR_KIND(MetaTrain(a, {}, setup_.vocab, SmallMeta()), ErrorKind::kInput);
}

TEST_F(MetaTest, EarlyStoppingKeepsBestEpoch) {
  Model a = AdapterModel();
  MetaConfig cfg = SmallMeta();
  cfg.epochs = 30.0;
  cfg.patience = 1;
  cfg.inner_optimizer = Lr(0.5);  // large steps make the query loss wander
  const auto r = MetaTrain(a, setup_.meta_train, setup_.vocab, cfg);
  ASSERT_EQ(r.epoch_query_losses.size(), r.epochs_run);
  const auto best = std::min_element(r.epoch_query_losses.begin(), r.epoch_query_losses.end());
  EXPECT_EQ(static_cast<std::size_t>(best - r.epoch_query_losses.begin()), r.best_epoch);
  if (r.stopped_early) EXPECT_LT(r.epochs_run, 30u);
  EXPECT_EQ(TakeSnapshot(a), r.params);
}

// --- meta-adaptation --------------------------------------------------------

TEST_F(MetaTest, MetaAdaptZeroLearningRateIsFixedPoint) {
  Model m = AdapterModel();
  const Snapshot psi = TakeSnapshot(m);
  AdaptSettings s;
  s.optimizer = Lr(0.0);
  Rng rng(2);
  EXPECT_EQ(MetaAdapt(m, psi, EncodeExamples(setup_.targets[0].adapt, setup_.vocab), s, rng).params, psi);
}

TEST_F(MetaTest, MetaAdaptLossNonIncreasingOnTinySplit) {
  Model m = AdapterModel();
  std::vector<SentencePair> ten(setup_.targets[0].train.begin(), setup_.targets[0].train.begin() + 10);
  AdaptSettings s;
  s.optimizer = Lr(1e-3);
  s.batch_size = 10;  // one full-batch step per epoch
  s.epochs = 8;
  s.shuffle = false;
  Rng rng(2);
  const auto r = MetaAdapt(m, TakeSnapshot(m), EncodeExamples(ten, setup_.vocab), s, rng);
  ASSERT_EQ(r.losses.size(), 8u);
  for (std::size_t i = 1; i < r.losses.size(); ++i) EXPECT_LE(r.losses[i], r.losses[i - 1]);
  EXPECT_LT(MeanLoss(m, EncodeExamples(ten, setup_.vocab)), r.losses.front());
}

TEST_F(MetaTest, MetaAdaptRunsAreIndependent) {
  Model m = AdapterModel();
  const Snapshot psi = TakeSnapshot(m);
  const auto theta = m.BackboneChecksum();
  AdaptSettings s;
  s.optimizer = Lr(1e-2);
  s.batch_size = 4;
  Rng r1(3), r2(3), r3(3);
  const auto a = MetaAdapt(m, psi, EncodeExamples(setup_.targets[0].adapt, setup_.vocab), s, r1).params;
  const auto b = MetaAdapt(m, psi, EncodeExamples(setup_.targets[1].adapt, setup_.vocab), s, r2).params;
  Model fresh = AdapterModel();
  const auto b_alone = MetaAdapt(fresh, psi, EncodeExamples(setup_.targets[1].adapt, setup_.vocab), s, r3).params;
  EXPECT_EQ(b, b_alone);
  EXPECT_NE(a, b);
  EXPECT_EQ(m.BackboneChecksum(), theta);
  EXPECT_ERROR_KIND(MetaAdapt(m, psi, {}, s, r1), ErrorKind::kInput);
}

// --- strategies -------------------------------------------------------------

StrategyConfig QuickStrategies() {
  StrategyConfig c;
  c.meta = SmallMeta();
  c.meta.epochs = 1.0;
  c.full_meta = c.meta;
  c.full_meta.inner_optimizer = Lr(3e-4);
  c.pooled_adapter.epochs = 1.0;
  c.pooled_full.epochs = 1.0;
  c.stack.epochs = 1.0;
  c.adapt_adapter.batch_size = 4;
  c.adapt_full.batch_size = 4;
  return c;
}

TEST(StrategyTest, NamesRoundTrip) {
  for (Strategy s : AllStrategies()) EXPECT_EQ(ParseStrategy(StrategyName(s)), s);
  EXPECT_ERROR_KIND(ParseStrategy("lora"), ErrorKind::kConfig);
  EXPECT_TRUE(IsBaseline(Strategy::kStackAdapter));
  EXPECT_FALSE(IsBaseline(Strategy::kM4Adapter));
}

TEST_F(MetaTest, BackboneFrozenExactlyForAdapterStrategies) {
  const StrategyConfig cfg = QuickStrategies();
  const auto theta = base_->BackboneChecksum();
  for (Strategy s : AllStrategies()) {
    const auto trained = TrainStrategy(s, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 1);
    const Model m = InstantiateStrategy(*base_, trained, setup_.targets[0].id);
    if (FreezesBackbone(s))
      EXPECT_EQ(m.BackboneChecksum(), theta) << StrategyName(s);
    else
      EXPECT_NE(m.BackboneChecksum(), theta) << StrategyName(s);
    // Adaptation keeps the same split between trained and frozen parameters.
    const auto r = AdaptAndEvaluate(*base_, trained, setup_.targets[0], setup_.vocab, cfg);
    EXPECT_EQ(r.record.strategy, StrategyName(s));
    EXPECT_GE(r.record.bleu, 0.0);
  }
  EXPECT_EQ(base_->BackboneChecksum(), theta);
}

TEST_F(MetaTest, CollapsedTagsReproduceFullFineTuning) {
  StrategyConfig cfg = QuickStrategies();
  cfg.tag_mode = TagMode::kCollapsed;
  const auto full = TrainStrategy(Strategy::kFullFt, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 4);
  const auto tag = TrainStrategy(Strategy::kTagFt, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 4);
  EXPECT_EQ(full.params, tag.params);
  EXPECT_EQ(full.losses, tag.losses);
  cfg.tag_mode = TagMode::kDomain;
  const auto tagged = TrainStrategy(Strategy::kTagFt, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 4);
  EXPECT_NE(full.params, tagged.params);
}

TEST_F(MetaTest, StackCountIsBanksTimesSingleAdapter) {
  const StrategyConfig cfg = QuickStrategies();
  const auto stack = TrainStrategy(Strategy::kStackAdapter, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 1);
  // Targets: news x {aa-bb, bb-aa}: two language pairs plus one domain.
  EXPECT_EQ(stack.stack_banks.size(), 3u);
  Model m = InstantiateStrategy(*base_, stack, setup_.targets[0].id);
  const std::size_t single = CountTrainable(*base_, Strategy::kM4Adapter).count;
  EXPECT_EQ(CountTrainable(m, Strategy::kStackAdapter).count, 3 * single);
  EXPECT_EQ(m.active_banks(), (std::vector<std::string>{LanguagePairBank(setup_.targets[0].id),
                                                         DomainBank(setup_.targets[0].id)}));
}

TEST_F(MetaTest, TrainingIsSeedDeterministic) {
  const StrategyConfig cfg = QuickStrategies();
  for (Strategy s : {Strategy::kM4Adapter, Strategy::kAgnosticAdapter, Strategy::kFullFt}) {
    const auto a = TrainStrategy(s, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 2);
    const auto b = TrainStrategy(s, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 2);
    EXPECT_EQ(a.params, b.params) << StrategyName(s);
  }
}

TEST_F(MetaTest, RandomAdapterSharesTheMetaInitialization) {
  StrategyConfig cfg = QuickStrategies();
  cfg.meta.inner_optimizer = Lr(0.0);
  const auto random = TrainStrategy(Strategy::kRandomAdapter, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 6);
  const auto meta = TrainStrategy(Strategy::kM4Adapter, *base_, setup_.meta_train, setup_.targets, setup_.vocab, cfg, 6);
  EXPECT_EQ(random.params, meta.params);
}

TEST_F(MetaTest, BaselineEntryRejectsNonBaselines) {
  EXPECT_ERROR_KIND(TrainBaseline(Strategy::kM4Adapter, *base_, setup_.meta_train, setup_.targets, setup_.vocab,
                                  QuickStrategies(), 1),
                    ErrorKind::kConfig);
}

}  // namespace
}  // namespace metaadapt
