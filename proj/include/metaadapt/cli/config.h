#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaadapt/corpus/world.h"
#include "metaadapt/meta/baselines.h"
#include "metaadapt/model/config.h"

namespace metaadapt {

struct PretrainSettings {
  FitSettings fit{.optimizer = {.learning_rate = 2e-3}, .batch_size = 32, .epochs = 12.0};
  double dropout = 0.0;
  std::uint64_t seed = 7;
  // The learnability gate: dev BLEU the pretrained backbone should reach.
  double min_dev_bleu = 90.0;
};

// Held-out DLP selection for one experiment.
//   main               held-out domains x (directions among held-out languages
//                      and between each held-out language and the first
//                      meta-training language)
//   domain-transfer    held-out domains x meta-training-language directions
//   language-transfer  meta-training domains x held-out-language directions
// An explicit target list overrides the rule.
struct ProtocolSpec {
  std::string name;
  std::vector<DlpId> targets;
};

struct SweepSpec {
  std::vector<Temperature> temperatures;
  std::vector<std::size_t> shots;
  double meta_epochs = 1.0;
  std::uint64_t seed = 1;
  std::string protocol = "main";
};

struct ExperimentConfig {
  std::string name = "experiment";
  WorldSpec world;
  ModelConfig model;
  AdapterConfig adapter;
  PretrainSettings pretrain;
  StrategyConfig strategy;
  std::vector<Strategy> strategies;
  std::vector<ProtocolSpec> protocols;
  std::vector<std::uint64_t> seeds;
  std::string reference = "zero-shot";
  std::size_t eval_batch = 32;
  SweepSpec sweep;

  // Config error on missing seeds, strategies or protocols, or bad values.
  void Validate() const;
  const ProtocolSpec& Protocol(const std::string& name) const;
};

// Applies "a.b.c=value" overrides; the value is parsed as JSON and falls
// back to a string.
void ApplyOverride(nlohmann::json& config, const std::string& assignment);

// Every parse problem is a config error. A "world" string is a path
// relative to the config file.
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json ExperimentConfigToJson(const ExperimentConfig& config);
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path,
                                      const std::vector<std::string>& overrides = {});

nlohmann::json ModelConfigToJson(const ModelConfig& c);
nlohmann::json AdapterConfigToJson(const AdapterConfig& c);
nlohmann::json MetaConfigToJson(const MetaConfig& c);
nlohmann::json StrategyConfigToJson(const StrategyConfig& c);
nlohmann::json PretrainSettingsToJson(const PretrainSettings& c);

// Stable 16-hex-digit hash of a JSON value's canonical dump.
std::string JsonKey(const nlohmann::json& j);

}  // namespace metaadapt
