#include "metaadapt/train/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metaadapt/core/error.h"
#include "metaadapt/eval/metrics.h"

namespace metaadapt {

std::vector<TokenPair> EncodeExamples(const std::vector<SentencePair>& pairs, const Vocab& vocab, TagMode tags) {
  std::vector<TokenPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    std::vector<int> src = ControlPrefix(vocab, p.dlp.tgt_lang, tags == TagMode::kDomain ? &p.dlp.domain : nullptr);
    const auto body = vocab.Encode(p.source);
    src.insert(src.end(), body.begin(), body.end());
    out.push_back({std::move(src), vocab.Encode(p.target)});
  }
  return out;
}

Batch ExampleBatch(std::span<const TokenPair> examples) { return MakeBatch(examples, std::span<const int>{}); }

double TrainStep(Model& model, AdamW& optimizer, std::span<const TokenPair> examples, Rng& rng) {
  const Batch batch = ExampleBatch(examples);
  Tape tape;
  ForwardOptions options{true, &rng};
  Var loss = model.ForwardLoss(tape, batch, options);
  const double value = loss.value().item();
  tape.Backward(loss);
  optimizer.Step();
  return value;
}

FitResult Fit(Model& model, const std::vector<TokenPair>& examples, const FitSettings& settings, Rng& rng,
              const StepCallback& on_step) {
  Require(!examples.empty(), ErrorKind::kInput, "fit: no training examples");
  Require(settings.batch_size >= 1, ErrorKind::kConfig, "fit: batch_size must be >= 1");
  Require(settings.epochs > 0.0, ErrorKind::kConfig, "fit: epochs must be positive");
  const std::size_t per_epoch = (examples.size() + settings.batch_size - 1) / settings.batch_size;
  std::size_t total = static_cast<std::size_t>(std::ceil(settings.epochs * static_cast<double>(per_epoch)));
  if (settings.max_steps > 0) total = std::min(total, settings.max_steps);

  AdamW optimizer(model.TrainableParams(), settings.optimizer);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  FitResult result;
  std::size_t cursor = examples.size();
  std::vector<TokenPair> batch;
  for (std::size_t step = 0; step < total; ++step) {
    batch.clear();
    while (batch.size() < settings.batch_size) {
      if (cursor == examples.size()) {
        // A new pass; a short tail batch closes the previous one.
        if (!batch.empty()) break;
        if (settings.shuffle) rng.Shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      batch.push_back(examples[order[cursor++]]);
    }
    double loss = 0.0;
    try {
      loss = TrainStep(model, optimizer, batch, rng);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kNumeric) Fail(ErrorKind::kNumeric, "step " + std::to_string(step) + ": " + e.what());
      throw;
    }
    Require(std::isfinite(loss), ErrorKind::kNumeric, "non-finite loss at step " + std::to_string(step));
    result.losses.push_back(loss);
    ++result.steps;
    if (on_step) on_step(step, loss);
  }
  return result;
}

double MeanLoss(Model& model, const std::vector<TokenPair>& examples, std::size_t batch_size) {
  Require(!examples.empty(), ErrorKind::kInput, "loss on an empty example set");
  double sum = 0.0;
  std::size_t tokens = 0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    const Batch batch = ExampleBatch(std::span<const TokenPair>(examples).subspan(start, end - start));
    Tape tape;
    NoGradGuard guard(tape);
    const double loss = model.ForwardLoss(tape, batch).value().item();
    std::size_t n = 0;
    for (std::size_t i = start; i < end; ++i) n += examples[i].target.size() + 1;
    sum += loss * static_cast<double>(n);
    tokens += n;
  }
  return sum / static_cast<double>(tokens);
}

std::vector<std::vector<int>> DecodeExamples(Model& model, const std::vector<TokenPair>& examples,
                                             std::size_t batch_size, std::size_t max_len) {
  if (max_len == 0) {
    std::size_t longest = 1;
    for (const auto& e : examples) longest = std::max(longest, e.target.size());
    max_len = std::min(longest + 4, model.config().max_seq_len - 1);
  }
  std::vector<std::vector<int>> out;
  out.reserve(examples.size());
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<std::vector<int>> rows;
    for (std::size_t i = start; i < end; ++i) {
      rows.push_back(examples[i].source);
      rows.back().push_back(kEosId);
    }
    for (auto& hyp : model.GreedyDecode(rows, max_len)) out.push_back(std::move(hyp));
  }
  return out;
}

TranslationScores ScoreTranslations(Model& model, const Vocab& vocab, const std::vector<SentencePair>& pairs,
                                    TagMode tags, std::size_t batch_size) {
  const auto examples = EncodeExamples(pairs, vocab, tags);
  TranslationScores s;
  std::vector<std::string> refs;
  for (const auto& ids : DecodeExamples(model, examples, batch_size)) s.hypotheses.push_back(Detokenize(ids, vocab));
  for (const auto& p : pairs) refs.push_back(JoinTokens(p.target));
  s.bleu = CorpusBleu(s.hypotheses, refs);
  s.chrf = CorpusChrf(s.hypotheses, refs);
  s.loss = MeanLoss(model, examples, batch_size);
  return s;
}

}  // namespace metaadapt
