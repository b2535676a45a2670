#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metaadapt/corpus/dataset.h"
#include "metaadapt/corpus/filter.h"
#include "metaadapt/corpus/vocab.h"
#include "metaadapt/corpus/world.h"
#include "test_util.h"

namespace metaadapt {
namespace {

namespace fs = std::filesystem;

SentencePair P(const std::string& src, const std::string& tgt) { return {SplitTokens(src), SplitTokens(tgt), {}}; }

WorldSpec TinySpec() {
  WorldSpec s;
  s.seed = 5;
  s.languages = {{"aa", Reorder::kIdentity}, {"bb", Reorder::kSwapPairs}, {"cc", Reorder::kReverseTriples}};
  s.held_out_languages = {"cc"};
  s.domains = {"law", "med", "news"};
  s.held_out_domains = {"news"};
  s.splits = {40, 10, 10, 10};
  s.pretrain_splits = {30, 0, 5, 0};
  return s;
}

fs::path TempDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("metaadapt_corpus_" + name);
  fs::remove_all(p);
  return p;
}

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(FilterTest, DropsOverLengthSentences) {
  Tokens long_side(176, "w");
  Tokens ok_side(175, "w");
  std::vector<SentencePair> pairs = {{long_side, {"x"}, {}}, {ok_side, {"x"}, {}}, {{"x"}, long_side, {}}};
  auto kept = FilterCorpus(pairs);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].source.size(), 175u);
}

TEST(FilterTest, PunctuationRatioIsStrictlyGreater) {
  EXPECT_DOUBLE_EQ(PunctuationRatio(SplitTokens("!!! ???")), 1.0);
  EXPECT_DOUBLE_EQ(PunctuationRatio(SplitTokens("hello !")), 0.5);
  auto kept = FilterCorpus({P("!!! ???", "a b"), P("hello !", "hello !")});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(JoinTokens(kept[0].source), "hello !");
  EXPECT_TRUE(IsPunctuationToken("..."));
  EXPECT_FALSE(IsPunctuationToken("<2aa>"));
  EXPECT_FALSE(IsPunctuationToken("a."));
}

TEST(FilterTest, RemovesDuplicatesKeepingOrder) {
  FilterStats stats;
  auto kept = FilterCorpus({P("a b", "c"), P("d", "e"), P("a b", "c"), P("a b", "x")}, &stats);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(JoinTokens(kept[1].source), "d");
  EXPECT_EQ(JoinTokens(kept[2].target), "x");
  EXPECT_EQ(stats.duplicates, 1u);
}

TEST(FilterTest, IsIdempotent) {
  const World world(TinySpec());
  Rng rng(3);
  std::vector<SentencePair> raw;
  for (int i = 0; i < 500; ++i) raw.push_back(world.SamplePair({"law", "aa", "bb"}, rng));
  auto once = FilterCorpus(raw);
  EXPECT_LT(once.size(), raw.size());
  EXPECT_EQ(FilterCorpus(once), once);
}

TEST(VocabTest, RoundTripsAndMapsUnknown) {
  std::vector<SentencePair> corpus = {P("ka lo mi .", "po ra ?"), P("lo lo", "ra")};
  Vocab v = BuildVocab(corpus, {"aa", "bb"}, {"law"});
  EXPECT_EQ(v.Token(kPadId), kPadToken);
  EXPECT_EQ(v.Token(kUnkId), kUnkToken);
  EXPECT_EQ(Detokenize(Tokenize("ka lo mi .", v), v), "ka lo mi .");
  EXPECT_EQ(Tokenize("zzz", v), std::vector<int>{kUnkId});
  EXPECT_EQ(v.Token(4), "<2aa>");
  EXPECT_EQ(v.Id("lo"), 7);  // most frequent content token right after the three tags
  EXPECT_ERROR_KIND(v.LanguageTagId("zz"), ErrorKind::kInput);
  EXPECT_EQ(ControlPrefix(v, "bb").size(), 1u);
  const std::string law = "law";
  EXPECT_EQ(ControlPrefix(v, "bb", &law).front(), v.Id("<d:law>"));
}

TEST(VocabTest, BuildIsOrderInsensitive) {
  const World world(TinySpec());
  Rng rng(9);
  std::vector<SentencePair> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(world.SamplePair({"med", "bb", "aa"}, rng));
  Vocab a = BuildVocab(corpus, {"aa", "bb"}, {"med"});
  std::shuffle(corpus.begin(), corpus.end(), std::mt19937(4));
  Vocab b = BuildVocab(corpus, {"bb", "aa"}, {"med"});
  EXPECT_EQ(a.tokens(), b.tokens());
}

TEST(WorldTest, ReorderRulesAreInvolutions) {
  const Tokens t = SplitTokens("a b c d e f g .");
  for (Reorder r : {Reorder::kIdentity, Reorder::kSwapPairs, Reorder::kReverseTriples})
    EXPECT_EQ(ApplyReorder(r, ApplyReorder(r, t)), t);
  EXPECT_EQ(JoinTokens(ApplyReorder(Reorder::kSwapPairs, t)), "b a d c f e g .");
  EXPECT_EQ(JoinTokens(ApplyReorder(Reorder::kReverseTriples, t)), "c b a f e d g .");
}

TEST(WorldTest, TranslationThroughTransformationsReproducesGold) {
  const World world(TinySpec());
  Rng rng(1);
  for (const std::string domain : {"general", "law", "news"}) {
    for (int i = 0; i < 50; ++i) {
      const DlpId id{domain, i % 2 ? "aa" : "cc", "bb"};
      const Tokens latent = world.SampleLatent(domain, rng);
      EXPECT_EQ(world.Parse("cc", world.Render("cc", latent)), latent);
      const Tokens src = world.Render(id.src_lang, latent);
      EXPECT_EQ(world.Translate(id, src), world.Render(id.tgt_lang, world.ShiftLatent(domain, latent)));
    }
  }
}

TEST(WorldTest, SpecializedDomainsShiftRegisterGeneralDoesNot) {
  const World world(TinySpec());
  const Tokens latent = SplitTokens("f0 s1 F1 law:0 .");
  EXPECT_EQ(world.ShiftLatent("general", latent), latent);
  const Tokens shifted = world.ShiftLatent("law", latent);
  EXPECT_EQ(shifted[0], "F0");
  EXPECT_EQ(shifted[2], "F1");
}

TEST(WorldTest, DomainUnigramDistributionsDiffer) {
  WorldSpec spec = TinySpec();
  const World world(spec);
  Rng rng(2);
  std::map<std::string, std::map<std::string, double>> counts;
  for (const std::string domain : {"law", "med"}) {
    double total = 0;
    for (int i = 0; i < 3000; ++i) {
      for (const auto& w : world.SampleLatent(domain, rng)) {
        if (w[0] == 'f' || w[0] == 'F' || IsPunctuationToken(w)) continue;
        counts[domain][w] += 1;
        total += 1;
      }
    }
    for (auto& [w, c] : counts[domain]) c /= total;
  }
  EXPECT_GE(TotalVariation(counts["law"], counts["med"]), 0.3);

  spec.core_rate = 0.1;
  EXPECT_ERROR_KIND(World{spec}, ErrorKind::kConfig);
}

TEST(WorldTest, SpecValidation) {
  WorldSpec s = TinySpec();
  s.held_out_domains = {"sports"};
  EXPECT_ERROR_KIND(s.Validate(), ErrorKind::kConfig);
  s = TinySpec();
  s.languages.pop_back();
  s.languages.pop_back();
  EXPECT_ERROR_KIND(s.Validate(), ErrorKind::kConfig);
  s = TinySpec();
  EXPECT_EQ(s.RoleOf({"general", "aa", "cc"}), DlpRole::kPretrain);
  EXPECT_EQ(s.RoleOf({"law", "aa", "bb"}), DlpRole::kMetaTrain);
  EXPECT_EQ(s.RoleOf({"law", "aa", "cc"}), DlpRole::kHeldOut);
  EXPECT_EQ(s.RoleOf({"news", "aa", "bb"}), DlpRole::kHeldOut);
  const WorldSpec back = WorldSpecFromJson(WorldSpecToJson(s));
  EXPECT_EQ(WorldSpecToJson(back), WorldSpecToJson(s));
}

TEST(GenerateTest, DeterministicTreeWithDisjointSplits) {
  const fs::path a = TempDir("a"), b = TempDir("b");
  const auto report = GenerateWorld(TinySpec(), a);
  GenerateWorld(TinySpec(), b);
  EXPECT_EQ(report.dlps, 4u * 6u);
  EXPECT_GT(report.filtered, 0u);
  EXPECT_EQ(report.shortfall_dlps, 0u);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    EXPECT_EQ(ReadAll(entry.path()), ReadAll(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 3u + 24u * 4u);

  const Registry reg = ReadRegistry(a);
  ASSERT_EQ(reg.entries.size(), 24u);
  const Vocab vocab = Vocab::Load(a / "vocab.tsv");
  const World world(TinySpec());
  for (const auto& e : reg.entries) {
    const DlpDataset ds = LoadDlpDataset(reg, e.id);
    if (e.role == DlpRole::kPretrain) {
      EXPECT_EQ(ds.train.size(), 30u);
      EXPECT_EQ(ds.valid.size(), 5u);
      EXPECT_TRUE(ds.test.empty());
    } else {
      EXPECT_EQ(ds.train.size(), 40u);
      EXPECT_EQ(ds.adapt.size(), 10u);
      EXPECT_EQ(ds.valid.size(), 10u);
      EXPECT_EQ(ds.test.size(), 10u);
    }
    for (const auto& p : ds.test) {
      EXPECT_EQ(world.Translate(e.id, p.source), p.target);
      EXPECT_EQ(Detokenize(vocab.Encode(p.target), vocab), JoinTokens(p.target));
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(DatasetTest, CapsTruncateHeadAndOverlapIsDetected) {
  const fs::path dir = TempDir("load");
  GenerateWorld(TinySpec(), dir);
  const Registry reg = ReadRegistry(dir);
  const DlpId id{"law", "aa", "bb"};
  const DlpDataset full = LoadDlpDataset(reg, id);
  const DlpDataset capped = LoadDlpDataset(reg, id, SplitSizes{7, 3, 2, 1});
  ASSERT_EQ(capped.train.size(), 7u);
  EXPECT_TRUE(std::equal(capped.train.begin(), capped.train.end(), full.train.begin()));
  EXPECT_EQ(capped.test.size(), 1u);

  // Copy an adapt pair into test.
  const fs::path test_file = dir / reg.Find(id).path / "test.tsv";
  std::ofstream(test_file, std::ios::app) << JoinTokens(full.adapt[0].source) << '\t'
                                          << JoinTokens(full.adapt[0].target) << '\n';
  EXPECT_ERROR_KIND(LoadDlpDataset(reg, id), ErrorKind::kDataIntegrity);
  EXPECT_ERROR_KIND(ReadRegistry(dir / "missing"), ErrorKind::kIo);
  EXPECT_ERROR_KIND(reg.Find({"law", "aa", "zz"}), ErrorKind::kInput);
  fs::remove(dir / reg.Find(id).path / "valid.tsv");
  EXPECT_ERROR_KIND(LoadDlpDataset(reg, id), ErrorKind::kIo);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace metaadapt
