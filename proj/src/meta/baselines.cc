#include "metaadapt/meta/baselines.h"

#include <chrono>
#include <set>

#include "metaadapt/core/error.h"

namespace metaadapt {
namespace {

constexpr std::uint64_t kAdapterInitStream = 0x41494e49;
constexpr std::uint64_t kPooledStream = 0x504f4f4c;
constexpr std::uint64_t kStackStream = 0x53544b53;
constexpr std::uint64_t kAdaptStream = 0x41445054;

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::vector<SentencePair> PooledTrain(const std::vector<DlpDataset>& tasks) {
  std::vector<SentencePair> out;
  for (const auto& t : tasks) out.insert(out.end(), t.train.begin(), t.train.end());
  return out;
}

TagMode TagsFor(Strategy s, const StrategyConfig& config) {
  return s == Strategy::kTagFt ? config.tag_mode : TagMode::kNone;
}

// Trains one stack bank alone on `pairs`.
void TrainStackBank(Model& model, const std::string& bank, const std::vector<SentencePair>& pairs, const Vocab& vocab,
                    const FitSettings& settings, std::uint64_t seed) {
  Require(!pairs.empty(), ErrorKind::kInput, "stack adapter " + bank + " has no training data");
  model.AddAdapterBank(bank, DeriveSeed(seed, {kAdapterInitStream, HashString(bank)}));
  model.FreezeAll();
  model.SetBankTrainable(bank, true);
  model.SetActiveBanks({bank});
  Rng rng(DeriveSeed(seed, {kStackStream, HashString(bank)}));
  Fit(model, EncodeExamples(pairs, vocab), settings, rng);
}

}  // namespace

void ConfigureStrategy(Model& model, Strategy strategy) {
  model.FreezeAll();
  switch (strategy) {
    case Strategy::kFullFt:
    case Strategy::kTagFt:
      model.SetBackboneTrainable(true);
      model.SetActiveBanks({});
      break;
    case Strategy::kM4Adapter:
    case Strategy::kAgnosticAdapter:
    case Strategy::kRandomAdapter:
      model.SetBankTrainable(kPrimaryBank, true);
      model.SetActiveBanks({kPrimaryBank});
      break;
    case Strategy::kFullModelMeta:
      model.SetBackboneTrainable(true);
      model.SetBankTrainable(kPrimaryBank, true);
      model.SetActiveBanks({kPrimaryBank});
      break;
    case Strategy::kStackAdapter:
      for (const auto& bank : model.AdapterBanks())
        if (bank.rfind("adapter@", 0) == 0) model.SetBankTrainable(bank, true);
      model.SetActiveBanks({});
      break;
    case Strategy::kZeroShot:
      model.SetActiveBanks({});
      break;
  }
}

std::string LanguagePairBank(const DlpId& dlp) { return "adapter@lp:" + dlp.LanguagePair(); }
std::string DomainBank(const DlpId& dlp) { return "adapter@domain:" + dlp.domain; }

TrainedStrategy TrainStrategy(Strategy strategy, const Model& base, const std::vector<DlpDataset>& meta_train,
                              const std::vector<DlpDataset>& targets, const Vocab& vocab,
                              const StrategyConfig& config, std::uint64_t seed, const MetaLogSink& sink) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainedStrategy out;
  out.strategy = strategy;
  out.seed = seed;
  Model model = base;
  model.ResetAdapterBank(kPrimaryBank, DeriveSeed(seed, {kAdapterInitStream}));
  ConfigureStrategy(model, strategy);
  Rng rng(DeriveSeed(seed, {kPooledStream}));

  switch (strategy) {
    case Strategy::kM4Adapter:
    case Strategy::kFullModelMeta: {
      MetaConfig meta = strategy == Strategy::kM4Adapter ? config.meta : config.full_meta;
      meta.seed = seed;
      out.meta = MetaTrain(model, meta_train, vocab, meta, sink);
      for (const auto& l : out.meta.log) out.losses.push_back(l.query_loss);
      out.params = out.meta.params;
      break;
    }
    case Strategy::kFullFt:
    case Strategy::kTagFt:
    case Strategy::kAgnosticAdapter: {
      Require(!meta_train.empty(), ErrorKind::kInput, "pooled training needs meta-training DLPs");
      const FitSettings& fit = strategy == Strategy::kAgnosticAdapter ? config.pooled_adapter : config.pooled_full;
      out.losses = Fit(model, EncodeExamples(PooledTrain(meta_train), vocab, TagsFor(strategy, config)), fit, rng).losses;
      out.params = TakeSnapshot(model);
      break;
    }
    case Strategy::kStackAdapter: {
      Require(!targets.empty(), ErrorKind::kInput, "stack adapter needs target DLPs");
      std::set<std::string> lps, domains;
      for (const auto& t : targets) {
        lps.insert(t.id.LanguagePair());
        domains.insert(t.id.domain);
      }
      auto collect = [&](auto matches) {
        std::vector<SentencePair> pairs;
        for (const auto& d : meta_train)
          if (matches(d.id)) pairs.insert(pairs.end(), d.train.begin(), d.train.end());
        for (const auto& d : targets)
          if (matches(d.id)) pairs.insert(pairs.end(), d.adapt.begin(), d.adapt.end());
        return pairs;
      };
      for (const auto& lp : lps) {
        const std::string bank = "adapter@lp:" + lp;
        TrainStackBank(model, bank, collect([&](const DlpId& id) { return id.LanguagePair() == lp; }), vocab,
                       config.stack, seed);
        out.stack_banks.push_back(bank);
      }
      for (const auto& domain : domains) {
        const std::string bank = "adapter@domain:" + domain;
        TrainStackBank(model, bank, collect([&](const DlpId& id) { return id.domain == domain; }), vocab,
                       config.stack, seed);
        out.stack_banks.push_back(bank);
      }
      std::vector<std::string> names;
      for (const auto& bank : out.stack_banks)
        for (const auto& n : model.BankParamNames(bank)) names.push_back(n);
      out.params = model.GetParams(names);
      break;
    }
    case Strategy::kRandomAdapter:
      out.params = TakeSnapshot(model);
      break;
    case Strategy::kZeroShot:
      break;
  }
  out.wall_seconds = Seconds(t0);
  return out;
}

TrainedStrategy TrainBaseline(Strategy strategy, const Model& base, const std::vector<DlpDataset>& meta_train,
                              const std::vector<DlpDataset>& targets, const Vocab& vocab,
                              const StrategyConfig& config, std::uint64_t seed) {
  Require(IsBaseline(strategy), ErrorKind::kConfig,
          "'" + std::string(StrategyName(strategy)) + "' is not a baseline strategy");
  return TrainStrategy(strategy, base, meta_train, targets, vocab, config, seed);
}

Model InstantiateStrategy(const Model& base, const TrainedStrategy& trained, const DlpId& target) {
  Model model = base;
  for (const auto& bank : trained.stack_banks)
    if (!model.HasAdapterBank(bank)) model.AddAdapterBank(bank, 0);
  model.SetParams(trained.params);
  ConfigureStrategy(model, trained.strategy);
  if (trained.strategy == Strategy::kStackAdapter) {
    const std::string lp = LanguagePairBank(target), domain = DomainBank(target);
    Require(model.HasAdapterBank(lp) && model.HasAdapterBank(domain), ErrorKind::kState,
            "stack adapter was not trained for " + target.ToString());
    model.SetActiveBanks({lp, domain});
  }
  return model;
}

TargetResult AdaptAndEvaluate(const Model& base, const TrainedStrategy& trained, const DlpDataset& target,
                              const Vocab& vocab, const StrategyConfig& config, std::size_t eval_batch) {
  const auto t0 = std::chrono::steady_clock::now();
  const Strategy s = trained.strategy;
  Model model = InstantiateStrategy(base, trained, target.id);
  const TagMode tags = TagsFor(s, config);
  TargetResult out;
  if (s != Strategy::kZeroShot && s != Strategy::kStackAdapter) {
    const AdaptSettings& settings = FreezesBackbone(s) ? config.adapt_adapter : config.adapt_full;
    Rng rng(DeriveSeed(trained.seed, {kAdaptStream, HashString(target.id.ToString())}));
    out.adapt_losses = MetaAdapt(model, TakeSnapshot(model), EncodeExamples(target.adapt, vocab, tags), settings, rng).losses;
  }
  TranslationScores scores = ScoreTranslations(model, vocab, target.test, tags, eval_batch);
  const TrainableCount count = CountTrainable(model, s);
  out.record.strategy = std::string(StrategyName(s));
  out.record.dlp = target.id;
  out.record.bleu = scores.bleu;
  out.record.chrf = scores.chrf;
  out.record.test_loss = scores.loss;
  out.record.trainable_params = count.count;
  out.record.trainable_ratio = count.ratio;
  out.record.wall_seconds = Seconds(t0);
  out.hypotheses = std::move(scores.hypotheses);
  return out;
}

}  // namespace metaadapt
