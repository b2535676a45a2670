#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metaadapt/eval/report.h"
#include "metaadapt/meta/meta_trainer.h"
#include "metaadapt/meta/strategy.h"

namespace metaadapt {

struct StrategyConfig {
  MetaConfig meta;                                          // m4adapter
  MetaConfig full_meta{.inner_optimizer = {.learning_rate = 3e-4}};  // full-model-meta
  FitSettings pooled_adapter{.optimizer = {.learning_rate = 5e-3}};  // agnostic-adapter
  FitSettings pooled_full{.optimizer = {.learning_rate = 3e-4}};     // full-ft, tag-ft
  FitSettings stack{.optimizer = {.learning_rate = 5e-3}, .epochs = 3.0};  // each stack bank
  AdaptSettings adapt_adapter;                              // adapter strategies on a target
  AdaptSettings adapt_full{.optimizer = {.learning_rate = 3e-4}};  // full-model strategies on a target
  TagMode tag_mode = TagMode::kDomain;                      // tag-ft
};

// Trainability flags and active adapter banks for the strategy.
void ConfigureStrategy(Model& model, Strategy strategy);

// Adapter bank names of the stack strategy.
std::string LanguagePairBank(const DlpId& dlp);
std::string DomainBank(const DlpId& dlp);

// Result of the training stage that precedes per-target adaptation.
struct TrainedStrategy {
  Strategy strategy = Strategy::kZeroShot;
  std::uint64_t seed = 0;
  ParamMap params;                       // full names; empty for zero-shot
  std::vector<std::string> stack_banks;  // stack only
  std::vector<double> losses;            // per step, or per meta-batch query loss
  MetaTrainResult meta;                  // meta strategies only
  double wall_seconds = 0.0;
};

// Runs the training stage of `strategy` on a copy of `base`:
//   m4adapter, full-model-meta    Reptile over the meta-training DLPs
//   full-ft, tag-ft               pooled fine-tuning of the backbone
//   agnostic-adapter              pooled training of one adapter
//   stack-adapter                 one adapter per language pair and per domain
//                                 of `targets`, each trained on every
//                                 meta-training train split and target adapt
//                                 split it covers
//   random-adapter                a fresh adapter, no training
//   zero-shot                     nothing
// Seeds drive adapter init, sampling, shuffling and dropout.
TrainedStrategy TrainStrategy(Strategy strategy, const Model& base, const std::vector<DlpDataset>& meta_train,
                              const std::vector<DlpDataset>& targets, const Vocab& vocab,
                              const StrategyConfig& config, std::uint64_t seed, const MetaLogSink& sink = nullptr);

// TrainStrategy restricted to the five baselines. Config error otherwise.
TrainedStrategy TrainBaseline(Strategy strategy, const Model& base, const std::vector<DlpDataset>& meta_train,
                              const std::vector<DlpDataset>& targets, const Vocab& vocab,
                              const StrategyConfig& config, std::uint64_t seed);

// Builds the strategy's model from `base` and the trained parameters,
// ready for adaptation or inference on `target`.
Model InstantiateStrategy(const Model& base, const TrainedStrategy& trained, const DlpId& target);

struct TargetResult {
  MetricsRecord record;
  std::vector<double> adapt_losses;
  std::vector<std::string> hypotheses;
};

// Fine-tunes on the target's adapt split with the strategy's adaptation
// budget (skipped for zero-shot and the stack), then scores the test split.
TargetResult AdaptAndEvaluate(const Model& base, const TrainedStrategy& trained, const DlpDataset& target,
                              const Vocab& vocab, const StrategyConfig& config, std::size_t eval_batch = 32);

}  // namespace metaadapt
