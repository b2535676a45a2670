#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metaadapt/core/rng.h"
#include "metaadapt/model/adapter.h"
#include "metaadapt/model/batch.h"
#include "metaadapt/model/config.h"
#include "metaadapt/tensor/tape.h"

namespace metaadapt {

// Name of the adapter bank holding the shared meta-adapter (psi).
inline constexpr const char* kPrimaryBank = "adapter";

// Backbone (theta) vs adapter (psi) parameter names. Disjoint and, together,
// covering every model parameter.
struct ParamPartition {
  std::vector<std::string> backbone;
  std::vector<std::string> adapters;
};

struct ForwardOptions {
  bool train = false;         // enables dropout
  Rng* dropout_rng = nullptr;  // required when train && dropout > 0
};

// Miniature pre-LN transformer encoder-decoder with tied input/output
// embeddings. One adapter slot follows the feed-forward sublayer of every
// encoder and decoder layer; each slot runs the active adapter banks in
// order, so a single bank is the usual setup and two banks give a stack.
class Model {
 public:
  // Deterministic from `seed`. Creates the primary adapter bank.
  Model(const ModelConfig& config, const AdapterConfig& adapter_config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const AdapterConfig& adapter_config() const { return adapter_config_; }

  // Logits [batch*tgt_len, vocab].
  Var Logits(Tape& tape, const Batch& batch, const ForwardOptions& options = {});
  // Mean token cross-entropy over non-padding target positions.
  Var ForwardLoss(Tape& tape, const Batch& batch, const ForwardOptions& options = {});

  // Argmax decoding of each row until eos or max_len tokens. Rows are full
  // source rows (control tokens + source + eos). Returned sequences exclude
  // bos and eos.
  std::vector<std::vector<int>> GreedyDecode(const std::vector<std::vector<int>>& source_rows,
                                             std::size_t max_len);

  // --- adapter banks ---------------------------------------------------
  // Adds a freshly initialized bank (zero up-projection). Config error if
  // the name exists.
  void AddAdapterBank(const std::string& bank, std::uint64_t seed);
  bool HasAdapterBank(const std::string& bank) const;
  std::vector<std::string> AdapterBanks() const { return banks_; }
  // Banks applied in every adapter slot, in order. Empty disables adapters.
  void SetActiveBanks(std::vector<std::string> banks);
  const std::vector<std::string>& active_banks() const { return active_; }

  // Bank values keyed by bank-relative names, e.g. "enc.0.down.w", so
  // snapshots move freely between banks and models of the same config.
  ParamMap GetAdapterParams(const std::string& bank = kPrimaryBank) const;
  // State error if names or shapes differ from the bank layout.
  void SetAdapterParams(const ParamMap& values, const std::string& bank = kPrimaryBank);
  // Re-draws a bank's initialization (zero up-projection).
  void ResetAdapterBank(const std::string& bank, std::uint64_t seed);

  // --- whole-model access ------------------------------------------------
  const ParamMap& params() const { return params_; }
  ParamMap BackboneParams() const;
  // Values of every parameter whose name is listed, by full name.
  ParamMap GetParams(const std::vector<std::string>& names) const;
  void SetParams(const ParamMap& values);
  std::uint64_t BackboneChecksum() const;

  ParamPartition Partition() const;
  std::size_t TotalParamCount() const;
  // Backbone parameter names only (no bank prefix).
  std::vector<std::string> BackboneNames() const;
  std::vector<std::string> BankParamNames(const std::string& bank) const;

  // --- trainability ------------------------------------------------------
  void FreezeAll();
  void SetBackboneTrainable(bool trainable);
  void SetBankTrainable(const std::string& bank, bool trainable);
  std::vector<Tensor*> TrainableParams();
  std::vector<std::string> TrainableNames() const;
  std::size_t TrainableCount() const;
  void ClearGrads();

 private:
  void InitBackbone(Rng& rng);
  void InitBank(const std::string& bank, Rng& rng);
  Var P(Tape& tape, const std::string& name);
  Var Encode(Tape& tape, std::span<const int> src, std::span<const std::uint8_t> src_valid,
             std::size_t batch, std::size_t src_len, const ForwardOptions& options, Var embed);
  Var Decode(Tape& tape, Var memory, std::span<const std::uint8_t> src_valid,
             std::span<const int> tgt_in, std::span<const std::uint8_t> tgt_valid,
             std::size_t batch, std::size_t src_len, std::size_t tgt_len,
             const ForwardOptions& options, Var embed);
  Var ApplyAdapters(Tape& tape, Var h, const std::string& site);
  Var Embed(Tape& tape, Var table, std::span<const int> ids, std::size_t batch, std::size_t len,
            const ForwardOptions& options);

  ModelConfig config_;
  AdapterConfig adapter_config_;
  ParamMap params_;
  std::vector<std::string> banks_;
  std::vector<std::string> active_;
  std::vector<double> positional_;  // [max_seq_len, D]
};

}  // namespace metaadapt
