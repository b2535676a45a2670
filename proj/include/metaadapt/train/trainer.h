#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metaadapt/core/rng.h"
#include "metaadapt/corpus/sentence.h"
#include "metaadapt/corpus/vocab.h"
#include "metaadapt/model/transformer.h"
#include "metaadapt/tensor/optimizer.h"

namespace metaadapt {

// How the domain tag enters the source row.
//   kNone       target-language tag only
//   kDomain     "<d:domain>" before the language tag
//   kCollapsed  every domain shares one tag, which is then dropped, so the
//               rows equal kNone (tag-collapse equivalence)
enum class TagMode { kNone, kDomain, kCollapsed };

// Encoded examples carry their control tokens inside `source`, so batches
// may mix DLPs with different target languages.
std::vector<TokenPair> EncodeExamples(const std::vector<SentencePair>& pairs, const Vocab& vocab,
                                      TagMode tags = TagMode::kNone);

Batch ExampleBatch(std::span<const TokenPair> examples);

struct FitSettings {
  AdamWSettings optimizer;
  std::size_t batch_size = 16;
  double epochs = 1.0;        // passes over the examples; fractional allowed
  std::size_t max_steps = 0;  // 0 = no cap
  bool shuffle = true;
};

struct FitResult {
  std::size_t steps = 0;
  std::vector<double> losses;  // training loss per step
};

using StepCallback = std::function<void(std::size_t step, double loss)>;

// Minibatch AdamW over the model's trainable parameters with a fresh
// optimizer. Dropout follows the model config. Numeric error (with the
// step index) on a non-finite loss.
FitResult Fit(Model& model, const std::vector<TokenPair>& examples, const FitSettings& settings, Rng& rng,
              const StepCallback& on_step = nullptr);

// One optimizer step on `examples` as a single batch.
double TrainStep(Model& model, AdamW& optimizer, std::span<const TokenPair> examples, Rng& rng);

// Token-weighted mean cross-entropy with dropout off.
double MeanLoss(Model& model, const std::vector<TokenPair>& examples, std::size_t batch_size = 32);

// Greedy decoding of every example source; max_len defaults to a margin over
// the longest gold target.
std::vector<std::vector<int>> DecodeExamples(Model& model, const std::vector<TokenPair>& examples,
                                             std::size_t batch_size = 32, std::size_t max_len = 0);

struct TranslationScores {
  double bleu = 0.0;
  double chrf = 0.0;
  double loss = 0.0;
  std::vector<std::string> hypotheses;
};

TranslationScores ScoreTranslations(Model& model, const Vocab& vocab, const std::vector<SentencePair>& pairs,
                                    TagMode tags = TagMode::kNone, std::size_t batch_size = 32);

}  // namespace metaadapt
