#include <gtest/gtest.h>

#include <cmath>

#include "metaadapt/core/error.h"
#include "metaadapt/core/rng.h"
#include "metaadapt/model/adapter.h"
#include "metaadapt/model/transformer.h"
#include "metaadapt/tensor/grad_check.h"
#include "metaadapt/tensor/ops.h"
#include "metaadapt/tensor/optimizer.h"
#include "test_util.h"

namespace metaadapt {
namespace {

ModelConfig SmallConfig() {
  ModelConfig c;
  c.vocab_size = 16;
  c.model_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ffn_dim = 12;
  c.max_seq_len = 16;
  c.dropout = 0.0;
  return c;
}

AdapterConfig SmallAdapter() {
  AdapterConfig a;
  a.bottleneck_dim = 3;
  return a;
}

std::vector<TokenPair> RandomPairs(Rng& rng, std::size_t n, int vocab) {
  std::vector<TokenPair> pairs(n);
  for (auto& p : pairs) {
    const std::size_t ls = 1 + rng.UniformIndex(5);
    const std::size_t lt = 1 + rng.UniformIndex(5);
    for (std::size_t i = 0; i < ls; ++i) p.source.push_back(4 + static_cast<int>(rng.UniformIndex(vocab - 4)));
    for (std::size_t i = 0; i < lt; ++i) p.target.push_back(4 + static_cast<int>(rng.UniformIndex(vocab - 4)));
  }
  return pairs;
}

void Perturb(Model& model, const std::string& bank, double scale, std::uint64_t seed) {
  Rng rng(seed);
  ParamMap psi = model.GetAdapterParams(bank);
  for (auto& [name, t] : psi)
    for (double& v : t.data()) v += rng.Uniform(-scale, scale);
  model.SetAdapterParams(psi, bank);
}

TEST(ModelConfigTest, RejectsInvalidDimensions) {
  ModelConfig c = SmallConfig();
  c.num_heads = 3;
  EXPECT_ERROR_KIND(c.Validate(), ErrorKind::kConfig);
  c = SmallConfig();
  c.model_dim = 0;
  EXPECT_ERROR_KIND(c.Validate(), ErrorKind::kConfig);
  AdapterConfig a;
  a.bottleneck_dim = 8;
  EXPECT_ERROR_KIND(a.Validate(SmallConfig()), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(Model(SmallConfig(), a, 1), ErrorKind::kConfig);
}

TEST(ModelTest, AdapterCountMatchesEnumeration) {
  ModelConfig c = SmallConfig();
  c.vocab_size = 40;
  c.model_dim = 64;
  c.num_layers = 2;
  c.num_heads = 4;
  c.ffn_dim = 128;
  const AdapterConfig a;
  EXPECT_EQ(AdapterParamCount(c, a), 2u * 64 * 16 + 64 * 2 + 16 + 64);
  Model model(c, a, 3);
  std::size_t enumerated = 0;
  for (const auto& name : model.BankParamNames(kPrimaryBank)) enumerated += model.params().at(name).size();
  EXPECT_EQ(enumerated, 2 * c.num_layers * AdapterParamCount(c, a));
}

TEST(ModelTest, PartitionIsDisjointAndTotal) {
  Model model(SmallConfig(), SmallAdapter(), 5);
  model.AddAdapterBank("adapter@lp:aa-bb", 5);
  const ParamPartition part = model.Partition();
  std::size_t total = 0;
  for (const auto& n : part.backbone) total += model.params().at(n).size();
  for (const auto& n : part.adapters) total += model.params().at(n).size();
  EXPECT_EQ(total, model.TotalParamCount());
  EXPECT_EQ(part.backbone.size() + part.adapters.size(), model.params().size());
  for (const auto& n : part.backbone) EXPECT_EQ(n.rfind("adapter", 0), std::string::npos) << n;
}

TEST(ModelTest, SameSeedGivesIdenticalParameters) {
  Model a(SmallConfig(), SmallAdapter(), 42);
  Model b(SmallConfig(), SmallAdapter(), 42);
  Model c(SmallConfig(), SmallAdapter(), 43);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.BackboneChecksum(), c.BackboneChecksum());
}

TEST(ModelTest, ZeroUpProjectionIsExactIdentity) {
  Model model(SmallConfig(), SmallAdapter(), 7);
  Rng rng(1);
  const std::vector<int> prefix = {5};
  for (int trial = 0; trial < 10; ++trial) {
    auto pairs = RandomPairs(rng, 3, 16);
    Batch batch = MakeBatch(pairs, prefix);
    Tape t1, t2;
    model.SetActiveBanks({kPrimaryBank});
    Tensor with = model.Logits(t1, batch).value();
    model.SetActiveBanks({});
    Tensor without = model.Logits(t2, batch).value();
    EXPECT_EQ(with, without);
  }
}

TEST(AdapterTest, HandEvaluatedExample) {
  Tape tape;
  Tensor h(Shape{1, 2}, {1.0, -1.0});
  Tensor eye(Shape{2, 2}, {1.0, 0.0, 0.0, 1.0});
  AdapterVars a{tape.Constant(Tensor(Shape{2}, 1.0)), tape.Constant(Tensor(Shape{2})),
                tape.Constant(eye), tape.Constant(Tensor(Shape{2})),
                tape.Constant(eye), tape.Constant(Tensor(Shape{2}))};
  Tensor out = AdapterForward(tape.Constant(h), a, 1e-12).value();
  EXPECT_NEAR(out[0], 2.0, 1e-9);
  EXPECT_NEAR(out[1], -1.0, 1e-9);
}

TEST(AdapterTest, ZeroUpProjectionReturnsInput) {
  Tape tape;
  Rng rng(3);
  Tensor h(Shape{3, 4});
  for (double& v : h.data()) v = rng.Normal(0, 1);
  Tensor down(Shape{4, 2});
  for (double& v : down.data()) v = rng.Normal(0, 1);
  AdapterVars a{tape.Constant(Tensor(Shape{4}, 1.0)), tape.Constant(Tensor(Shape{4})),
                tape.Constant(down), tape.Constant(Tensor(Shape{2}, 0.3)),
                tape.Constant(Tensor(Shape{2, 4})), tape.Constant(Tensor(Shape{4}))};
  EXPECT_EQ(AdapterForward(tape.Constant(h), a, 1e-5).value(), h);
}

TEST(AdapterTest, WidthMismatchIsDimensionError) {
  Tape tape;
  AdapterVars a{tape.Constant(Tensor(Shape{4}, 1.0)), tape.Constant(Tensor(Shape{4})),
                tape.Constant(Tensor(Shape{4, 2})), tape.Constant(Tensor(Shape{2})),
                tape.Constant(Tensor(Shape{2, 4})), tape.Constant(Tensor(Shape{4}))};
  EXPECT_ERROR_KIND(AdapterForward(tape.Constant(Tensor(Shape{2, 3})), a, 1e-5), ErrorKind::kDimension);
}

TEST(AdapterTest, DownProjectionGradientMatchesFiniteDifferences) {
  Rng rng(9);
  auto random = [&](Shape s, double scale) {
    Tensor t(std::move(s));
    for (double& v : t.data()) v = rng.Normal(0, scale);
    t.set_requires_grad(true);
    return t;
  };
  Tensor h = random({3, 6}, 1.0), g = random({6}, 0.3), b = random({6}, 0.3);
  Tensor dw = random({6, 2}, 0.5), db = random({2}, 0.5), uw = random({2, 6}, 0.5), ub = random({6}, 0.5);
  Tensor weights = random({3, 6}, 1.0);
  std::vector<Tensor*> params = {&h, &g, &b, &dw, &db, &uw, &ub};
  auto report = GradCheck(
      [&](Tape& t) {
        AdapterVars a{t.Leaf(g), t.Leaf(b), t.Leaf(dw), t.Leaf(db), t.Leaf(uw), t.Leaf(ub)};
        return ops::Sum(ops::Mul(AdapterForward(t.Leaf(h), a, 1e-5), t.Constant(weights)));
      },
      params);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(ModelTest, FullModelGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u}) {
    Model model(SmallConfig(), SmallAdapter(), seed);
    Perturb(model, kPrimaryBank, 0.3, seed + 100);
    Rng rng(seed);
    Batch batch = MakeBatch(RandomPairs(rng, 2, 16), std::vector<int>{6});
    model.SetBackboneTrainable(true);
    model.SetBankTrainable(kPrimaryBank, true);
    std::vector<Tensor*> params = model.TrainableParams();
    // Attention key biases have an identically zero gradient, so their
    // central differences are pure rounding noise (~1e-10 absolute).
    auto report = GradCheck([&](Tape& t) { return model.ForwardLoss(t, batch); }, params,
                            {.denominator_floor = 1e-6, .max_coords_per_tensor = 6});
    EXPECT_TRUE(report.passed) << "seed " << seed << " rel " << report.max_relative_error << " abs " << report.max_absolute_error;
    EXPECT_GT(report.checked, 100u);
  }
}

TEST(ModelTest, UniformLogitsGiveLogVocabLoss) {
  Model model(SmallConfig(), SmallAdapter(), 4);
  ParamMap zero;
  zero.emplace("embed", Tensor(Shape{16, 8}));
  model.SetParams(zero);
  Rng rng(2);
  Batch batch = MakeBatch(RandomPairs(rng, 3, 16), std::vector<int>{5});
  Tape tape;
  EXPECT_NEAR(model.ForwardLoss(tape, batch).value().item(), std::log(16.0), 1e-12);
}

TEST(ModelTest, LossIsBitReproducible) {
  Rng r1(8), r2(8);
  Model a(SmallConfig(), SmallAdapter(), 4), b(SmallConfig(), SmallAdapter(), 4);
  Batch b1 = MakeBatch(RandomPairs(r1, 4, 16), std::vector<int>{5});
  Batch b2 = MakeBatch(RandomPairs(r2, 4, 16), std::vector<int>{5});
  Tape t1, t2;
  EXPECT_EQ(a.ForwardLoss(t1, b1).value().item(), b.ForwardLoss(t2, b2).value().item());
}

TEST(ModelTest, EmptyBatchIsInputError) {
  Model model(SmallConfig(), SmallAdapter(), 4);
  Tape tape;
  EXPECT_ERROR_KIND(model.ForwardLoss(tape, Batch{}), ErrorKind::kInput);
}

TEST(ModelTest, OverfitsOnePairAndDecodesIt) {
  ModelConfig c = SmallConfig();
  c.model_dim = 16;
  c.ffn_dim = 32;
  Model model(c, SmallAdapter(), 11);
  model.SetBackboneTrainable(true);
  const std::vector<TokenPair> pair = {{{7, 8, 9}, {10, 11, 12, 13}}};
  const std::vector<int> prefix = {5};
  Batch batch = MakeBatch(pair, prefix);
  AdamW opt(model.TrainableParams(), {.learning_rate = 1e-2});
  for (int step = 0; step < 200; ++step) {
    Tape tape;
    tape.Backward(model.ForwardLoss(tape, batch));
    opt.Step();
  }
  auto out = model.GreedyDecode({MakeSourceRow(pair[0].source, prefix)}, 10);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], pair[0].target);
}

TEST(ModelTest, DecodingIgnoresBatchPadding) {
  Model model(SmallConfig(), SmallAdapter(), 12);
  Perturb(model, kPrimaryBank, 0.3, 5);
  const std::vector<int> prefix = {5};
  const auto short_row = MakeSourceRow(std::vector<int>{7, 8}, prefix);
  const auto long_row = MakeSourceRow(std::vector<int>{9, 10, 11, 12, 13, 14}, prefix);
  auto alone = model.GreedyDecode({short_row}, 6);
  auto batched = model.GreedyDecode({short_row, long_row}, 6);
  EXPECT_EQ(alone[0], batched[0]);
}

TEST(ModelTest, DecodedLengthNeverExceedsMaxLen) {
  Model model(SmallConfig(), SmallAdapter(), 13);
  Rng rng(4);
  for (std::size_t max_len : {1u, 2u, 5u}) {
    std::vector<std::vector<int>> rows;
    for (const auto& p : RandomPairs(rng, 4, 16)) rows.push_back(MakeSourceRow(p.source, std::vector<int>{5}));
    for (const auto& out : model.GreedyDecode(rows, max_len)) EXPECT_LE(out.size(), max_len);
  }
  EXPECT_ERROR_KIND(model.GreedyDecode({{5, 2}}, 0), ErrorKind::kInput);
}

TEST(ModelTest, AdapterSnapshotsRoundTripAndLeaveBackbone) {
  Model a(SmallConfig(), SmallAdapter(), 21);
  Model b(SmallConfig(), SmallAdapter(), 22);
  Perturb(a, kPrimaryBank, 0.5, 3);
  const std::uint64_t theta_b = b.BackboneChecksum();
  const ParamMap psi = a.GetAdapterParams();
  b.SetAdapterParams(psi);
  EXPECT_EQ(b.GetAdapterParams(), psi);
  EXPECT_EQ(b.BackboneChecksum(), theta_b);

  ParamMap broken = psi;
  broken.erase(broken.begin());
  EXPECT_ERROR_KIND(b.SetAdapterParams(broken), ErrorKind::kState);
  ParamMap reshaped = psi;
  reshaped.begin()->second = Tensor(Shape{1});
  EXPECT_ERROR_KIND(b.SetAdapterParams(reshaped), ErrorKind::kState);
}

TEST(ModelTest, StackedBanksComposeInOrder) {
  Model model(SmallConfig(), SmallAdapter(), 30);
  model.AddAdapterBank("adapter@lp:aa-bb", 31);
  model.AddAdapterBank("adapter@domain:law", 32);
  EXPECT_ERROR_KIND(model.AddAdapterBank("adapter@domain:law", 1), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(model.AddAdapterBank("embed", 1), ErrorKind::kConfig);
  Perturb(model, "adapter@lp:aa-bb", 0.5, 1);
  Perturb(model, "adapter@domain:law", 0.5, 2);
  Rng rng(1);
  Batch batch = MakeBatch(RandomPairs(rng, 2, 16), std::vector<int>{5});
  model.SetActiveBanks({"adapter@lp:aa-bb", "adapter@domain:law"});
  Tape t1, t2;
  Tensor forward = model.Logits(t1, batch).value();
  model.SetActiveBanks({"adapter@domain:law", "adapter@lp:aa-bb"});
  Tensor reversed = model.Logits(t2, batch).value();
  EXPECT_NE(forward, reversed);
  EXPECT_ERROR_KIND(model.SetActiveBanks({"adapter@nope"}), ErrorKind::kState);
}

TEST(ModelTest, FrozenBackboneUnchangedByAdapterTraining) {
  Model model(SmallConfig(), SmallAdapter(), 40);
  model.FreezeAll();
  model.SetBankTrainable(kPrimaryBank, true);
  EXPECT_EQ(model.TrainableCount(), 2 * AdapterParamCount(SmallConfig(), SmallAdapter()));
  const std::uint64_t theta = model.BackboneChecksum();
  Rng rng(2);
  Batch batch = MakeBatch(RandomPairs(rng, 3, 16), std::vector<int>{5});
  AdamW opt(model.TrainableParams(), {.learning_rate = 1e-2});
  for (int i = 0; i < 5; ++i) {
    Tape tape;
    tape.Backward(model.ForwardLoss(tape, batch));
    opt.Step();
  }
  EXPECT_EQ(model.BackboneChecksum(), theta);
  EXPECT_NE(model.GetAdapterParams(), Model(SmallConfig(), SmallAdapter(), 40).GetAdapterParams());
}

}  // namespace
}  // namespace metaadapt
