#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "metaadapt/core/error.h"
#include "metaadapt/core/rng.h"
#include "metaadapt/eval/metrics.h"
#include "metaadapt/eval/report.h"
#include "metaadapt/meta/baselines.h"
#include "metaadapt/model/transformer.h"
#include "test_util.h"

namespace metaadapt {
namespace {

using Lines = std::vector<std::string>;

TEST(BleuTest, IdenticalCorpusScoresHundred) {
  const Lines refs = {"the cat sat on the mat", "a b c d e", "x y"};
  EXPECT_DOUBLE_EQ(CorpusBleu(refs, refs), 100.0);
}

TEST(BleuTest, ZeroFourGramPrecisionGivesZero) {
  // Precisions 3/4, 2/3, 1/2, 0/1: unsmoothed BLEU is 0.
  const BleuStats s = SentenceBleuStats("a b c e", "a b c d");
  EXPECT_EQ(s.matches[0], 3u);
  EXPECT_EQ(s.totals[0], 4u);
  EXPECT_EQ(s.matches[1], 2u);
  EXPECT_EQ(s.totals[1], 3u);
  EXPECT_EQ(s.matches[2], 1u);
  EXPECT_EQ(s.totals[2], 2u);
  EXPECT_EQ(s.matches[3], 0u);
  EXPECT_EQ(s.totals[3], 1u);
  EXPECT_EQ(CorpusBleu({"a b c e"}, {"a b c d"}), 0.0);
}

TEST(BleuTest, ShortHypothesisUsesAvailableOrdersAndBrevityPenalty) {
  // p1 = p2 = 1, orders 3 and 4 have no hypothesis n-grams, BP = e^(1 - 4/2).
  EXPECT_NEAR(CorpusBleu({"a b"}, {"a b c d"}), 100.0 * std::exp(-1.0), 1e-12);
  EXPECT_NEAR(CorpusBleu({"a b"}, {"a b c d"}), 36.79, 5e-3);
}

TEST(BleuTest, IsCaseSensitive) {
  EXPECT_LT(CorpusBleu({"A b c d"}, {"a b c d"}), 100.0);
}

TEST(BleuTest, ClipsRepeatedNGrams) {
  const BleuStats s = SentenceBleuStats("the the the the", "the cat");
  EXPECT_EQ(s.matches[0], 1u);
  EXPECT_EQ(s.totals[0], 4u);
}

TEST(BleuTest, StaysInRange) {
  Rng rng(3);
  const Lines words = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 50; ++trial) {
    Lines hyps, refs;
    for (int i = 0; i < 5; ++i) {
      std::string h, r;
      for (std::size_t k = 0, n = 1 + rng.UniformIndex(6); k < n; ++k) h += words[rng.UniformIndex(5)] + " ";
      for (std::size_t k = 0, n = 1 + rng.UniformIndex(6); k < n; ++k) r += words[rng.UniformIndex(5)] + " ";
      hyps.push_back(h);
      refs.push_back(r);
    }
    const double b = CorpusBleu(hyps, refs);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 100.0);
  }
}

TEST(BleuTest, ShardedStatsMergeToCorpusScore) {
  const Lines hyps = {"a b c d", "x y z", "p q r s t"};
  const Lines refs = {"a b c e", "x y z", "p q s t"};
  BleuStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += SentenceBleuStats(hyps[i], refs[i]);
  EXPECT_DOUBLE_EQ(BleuFromStats(total), CorpusBleu(hyps, refs));
}

TEST(BleuTest, RejectsEmptyAndMismatchedInputs) {
  EXPECT_ERROR_KIND(CorpusBleu({}, {}), ErrorKind::kInput);
  EXPECT_ERROR_KIND(CorpusBleu({"a"}, {"a", "b"}), ErrorKind::kInput);
}

TEST(ChrfTest, IdenticalCorpusScoresHundred) {
  const Lines refs = {"hello world", "abc def"};
  EXPECT_DOUBLE_EQ(CorpusChrf(refs, refs), 100.0);
}

TEST(ChrfTest, DisjointCharactersScoreZero) {
  EXPECT_EQ(CorpusChrf({"abc"}, {"xyz"}), 0.0);
}

TEST(ChrfTest, HandCountedExample) {
  // Orders 1..3 exist for both sides: F1 = 2/3, F2 = 1/2, F3 = 0.
  const ChrfStats s = SentenceChrfStats("abc", "abd");
  EXPECT_EQ(s.matches[0], 2u);
  EXPECT_EQ(s.matches[1], 1u);
  EXPECT_EQ(s.matches[2], 0u);
  EXPECT_EQ(s.hyp_total[3], 0u);
  EXPECT_NEAR(CorpusChrf({"abc"}, {"abd"}), 100.0 * (2.0 / 3.0 + 0.5 + 0.0) / 3.0, 1e-12);
}

TEST(ChrfTest, IgnoresWhitespace) {
  EXPECT_DOUBLE_EQ(CorpusChrf({"a b c"}, {"abc"}), 100.0);
}

TEST(ChrfTest, WeightsRecallAbovePrecision) {
  // Same match counts; the hypothesis that covers more of the reference wins.
  const double short_hyp = CorpusChrf({"ab"}, {"abcd"});
  const double long_hyp = CorpusChrf({"abcd"}, {"ab"});
  EXPECT_GT(short_hyp, 0.0);
  EXPECT_LT(short_hyp, long_hyp);
}

TEST(ChrfTest, RejectsEmptyAndMismatchedInputs) {
  EXPECT_ERROR_KIND(CorpusChrf({}, {}), ErrorKind::kInput);
  EXPECT_ERROR_KIND(CorpusChrf({"a", "b"}, {"a"}), ErrorKind::kInput);
}

TEST(MetricsTest, PairPermutationLeavesScoresUnchanged) {
  Lines hyps = {"a b c d", "x y", "p q r", "m n o p q"};
  Lines refs = {"a b d d", "x y", "p r q", "m n o q q"};
  const double bleu = CorpusBleu(hyps, refs);
  const double chrf = CorpusChrf(hyps, refs);
  std::vector<std::size_t> order = {2, 0, 3, 1};
  Lines ph, pr;
  for (std::size_t i : order) {
    ph.push_back(hyps[i]);
    pr.push_back(refs[i]);
  }
  EXPECT_DOUBLE_EQ(CorpusBleu(ph, pr), bleu);
  EXPECT_DOUBLE_EQ(CorpusChrf(ph, pr), chrf);
}

MetricsRecord Record(const std::string& strategy, const std::string& dlp, double bleu, double chrf = 50.0) {
  MetricsRecord r;
  r.run_id = "seed-1";
  r.strategy = strategy;
  r.dlp = ParseDlpId(dlp);
  r.bleu = bleu;
  r.chrf = chrf;
  r.test_loss = 1.5;
  r.trainable_params = 10;
  r.trainable_ratio = 0.25;
  return r;
}

TEST(AggregateTest, SingleRecordEqualsTheRecord) {
  const auto t = Aggregate({Record("zero-shot", "news-aa-bb", 12.5, 40.0)}, Grouping::kDomain, "zero-shot");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].group, "news");
  EXPECT_EQ(t.rows[0].count, 1u);
  EXPECT_DOUBLE_EQ(t.rows[0].bleu, 12.5);
  EXPECT_DOUBLE_EQ(t.rows[0].chrf, 40.0);
  EXPECT_TRUE(t.rows[0].has_delta);
  EXPECT_DOUBLE_EQ(t.rows[0].delta_bleu, 0.0);
}

TEST(AggregateTest, MeanAndDeltaIndependentOfOrder) {
  std::vector<MetricsRecord> records = {Record("m4adapter", "news-aa-bb", 20.0), Record("m4adapter", "news-bb-aa", 30.0),
                                        Record("zero-shot", "news-aa-bb", 10.0), Record("zero-shot", "news-bb-aa", 10.0)};
  const auto a = Aggregate(records, Grouping::kDomain, "zero-shot");
  std::reverse(records.begin(), records.end());
  const auto b = Aggregate(records, Grouping::kDomain, "zero-shot");
  ASSERT_EQ(a.rows.size(), 2u);
  ASSERT_EQ(b.rows.size(), 2u);
  EXPECT_EQ(a.rows[0].strategy, "m4adapter");
  EXPECT_DOUBLE_EQ(a.rows[0].bleu, 25.0);
  EXPECT_DOUBLE_EQ(a.rows[0].delta_bleu, 15.0);
  EXPECT_DOUBLE_EQ(a.rows[1].delta_bleu, 0.0);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.rows[i].strategy, b.rows[i].strategy);
    EXPECT_DOUBLE_EQ(a.rows[i].bleu, b.rows[i].bleu);
    EXPECT_DOUBLE_EQ(a.rows[i].delta_bleu, b.rows[i].delta_bleu);
  }
}

TEST(AggregateTest, GroupsByLanguagePairAndDlp) {
  const std::vector<MetricsRecord> records = {Record("zero-shot", "law-aa-bb", 10.0),
                                              Record("zero-shot", "med-aa-bb", 20.0),
                                              Record("zero-shot", "med-bb-aa", 40.0)};
  const auto lp = Aggregate(records, Grouping::kLanguagePair, "zero-shot");
  ASSERT_EQ(lp.rows.size(), 2u);
  EXPECT_EQ(lp.rows[0].group, "aa-bb");
  EXPECT_DOUBLE_EQ(lp.rows[0].bleu, 15.0);
  EXPECT_EQ(Aggregate(records, Grouping::kDlp, "zero-shot").rows.size(), 3u);
  const auto by_strategy = Aggregate(records, Grouping::kStrategy, "zero-shot");
  ASSERT_EQ(by_strategy.rows.size(), 1u);
  EXPECT_NEAR(by_strategy.rows[0].bleu, 70.0 / 3.0, 1e-12);
}

TEST(AggregateTest, GroupWithoutReferenceHasNoDelta) {
  const auto t = Aggregate({Record("zero-shot", "law-aa-bb", 10.0), Record("m4adapter", "med-aa-bb", 20.0)},
                           Grouping::kDomain, "zero-shot");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1].group, "med");
  EXPECT_FALSE(t.rows[1].has_delta);
}

TEST(AggregateTest, MissingReferenceOrRecordsIsInputError) {
  EXPECT_ERROR_KIND(Aggregate({Record("m4adapter", "law-aa-bb", 1.0)}, Grouping::kDomain, "zero-shot"),
                    ErrorKind::kInput);
  EXPECT_ERROR_KIND(Aggregate({}, Grouping::kDomain, "zero-shot"), ErrorKind::kInput);
}

TEST(ReportCsvTest, MetricsRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "metaadapt_metrics_test";
  std::filesystem::create_directories(dir);
  std::vector<MetricsRecord> records = {Record("m4adapter", "law-aa-bb", 12.25, 40.5),
                                        Record("full-ft", "my-domain-cc-dd", 0.0, 0.0)};
  records[1].trainable_ratio = 1.0;
  WriteMetricsCsv(dir / "m.csv", records);
  const auto back = ReadMetricsCsv(dir / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].strategy, "m4adapter");
  EXPECT_EQ(back[1].dlp, ParseDlpId("my-domain-cc-dd"));
  EXPECT_DOUBLE_EQ(back[0].bleu, 12.25);
  EXPECT_DOUBLE_EQ(back[1].trainable_ratio, 1.0);

  std::ofstream(dir / "bad.csv") << kMetricsHeader << "\nonly,three,fields\n";
  EXPECT_ERROR_KIND(ReadMetricsCsv(dir / "bad.csv"), ErrorKind::kDataIntegrity);
  EXPECT_ERROR_KIND(ReadMetricsCsv(dir / "missing.csv"), ErrorKind::kIo);
  std::filesystem::remove_all(dir);
}

ModelConfig ToyModel() {
  ModelConfig c;
  c.vocab_size = 20;
  c.model_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ffn_dim = 12;
  c.max_seq_len = 16;
  return c;
}

TEST(CountTrainableTest, RatiosByStrategy) {
  Model model(ToyModel(), AdapterConfig{.bottleneck_dim = 2}, 1);
  std::size_t theta = 0, psi = 0;
  for (const auto& [name, t] : model.BackboneParams()) theta += t.size();
  for (const auto& [name, t] : model.GetAdapterParams()) psi += t.size();

  const auto full = CountTrainable(model, Strategy::kFullFt);
  EXPECT_EQ(full.count, theta);
  EXPECT_DOUBLE_EQ(full.ratio, 1.0);
  const auto m4 = CountTrainable(model, Strategy::kM4Adapter);
  const auto agnostic = CountTrainable(model, Strategy::kAgnosticAdapter);
  EXPECT_EQ(m4.count, psi);
  EXPECT_EQ(agnostic.count, m4.count);
  EXPECT_DOUBLE_EQ(m4.ratio, static_cast<double>(psi) / static_cast<double>(theta + psi));
  EXPECT_EQ(CountTrainable(model, Strategy::kZeroShot).count, 0u);
  EXPECT_EQ(CountTrainable(model, Strategy::kFullModelMeta).count, theta + psi);
}

TEST(CountTrainableTest, StackScalesWithBanks) {
  Model model(ToyModel(), AdapterConfig{.bottleneck_dim = 2}, 1);
  const std::size_t single = CountTrainable(model, Strategy::kM4Adapter).count;
  const std::vector<DlpId> targets = {ParseDlpId("news-aa-bb"), ParseDlpId("news-bb-aa"), ParseDlpId("law-aa-bb")};
  std::set<std::string> banks;
  for (const auto& t : targets) {
    banks.insert(LanguagePairBank(t));
    banks.insert(DomainBank(t));
  }
  for (const auto& b : banks) model.AddAdapterBank(b, 2);
  // Two language pairs and two domains.
  EXPECT_EQ(banks.size(), 4u);
  EXPECT_EQ(CountTrainable(model, Strategy::kStackAdapter).count, 4 * single);
}

TEST(EfficiencyTest, OneRowPerStrategyFromRecords) {
  auto a = Record("m4adapter", "law-aa-bb", 1.0);
  a.trainable_params = 7;
  a.trainable_ratio = 0.01;
  auto b = Record("full-ft", "law-aa-bb", 1.0);
  b.trainable_params = 700;
  b.trainable_ratio = 1.0;
  const auto rows = EfficiencyTable({a, b, a});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].strategy, "m4adapter");
  EXPECT_EQ(rows[0].trainable_params, 7u);
  EXPECT_DOUBLE_EQ(rows[1].trainable_ratio, 1.0);
}

}  // namespace
}  // namespace metaadapt
