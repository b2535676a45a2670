#include "metaadapt/cli/config.h"

#include <fstream>
#include <sstream>

#include "metaadapt/core/error.h"
#include "metaadapt/tensor/checkpoint.h"

namespace metaadapt {
namespace {

using nlohmann::json;

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Temperature TemperatureFromJson(const json& j) {
  if (j.is_string()) return Temperature::Parse(j.get<std::string>());
  return Temperature::Finite(j.get<double>());
}

json TemperatureToJson(const Temperature& t) {
  return t.infinite() ? json("inf") : json(t.value());
}

void ReadOptimizer(const json& j, AdamWSettings& o) {
  Read(j, "learning_rate", o.learning_rate);
  Read(j, "beta1", o.beta1);
  Read(j, "beta2", o.beta2);
  Read(j, "epsilon", o.epsilon);
  Read(j, "weight_decay", o.weight_decay);
  Read(j, "clip_norm", o.clip_norm);
}

json OptimizerToJson(const AdamWSettings& o) {
  return {{"learning_rate", o.learning_rate}, {"beta1", o.beta1},           {"beta2", o.beta2},
          {"epsilon", o.epsilon},             {"weight_decay", o.weight_decay}, {"clip_norm", o.clip_norm}};
}

void ReadFit(const json& j, FitSettings& f) {
  ReadOptimizer(j, f.optimizer);
  Read(j, "batch_size", f.batch_size);
  Read(j, "epochs", f.epochs);
  Read(j, "max_steps", f.max_steps);
  Read(j, "shuffle", f.shuffle);
}

json FitToJson(const FitSettings& f) {
  json j = OptimizerToJson(f.optimizer);
  j["batch_size"] = f.batch_size;
  j["epochs"] = f.epochs;
  j["max_steps"] = f.max_steps;
  j["shuffle"] = f.shuffle;
  return j;
}

void ReadAdapt(const json& j, AdaptSettings& a) {
  ReadOptimizer(j, a.optimizer);
  Read(j, "batch_size", a.batch_size);
  Read(j, "epochs", a.epochs);
  Read(j, "shuffle", a.shuffle);
}

json AdaptToJson(const AdaptSettings& a) {
  json j = OptimizerToJson(a.optimizer);
  j["batch_size"] = a.batch_size;
  j["epochs"] = a.epochs;
  j["shuffle"] = a.shuffle;
  return j;
}

TagMode ParseTagMode(const std::string& s) {
  if (s == "none") return TagMode::kNone;
  if (s == "domain") return TagMode::kDomain;
  if (s == "collapsed") return TagMode::kCollapsed;
  Fail(ErrorKind::kConfig, "unknown tag mode '" + s + "' (none, domain, collapsed)");
}

std::string TagModeName(TagMode t) {
  switch (t) {
    case TagMode::kNone: return "none";
    case TagMode::kDomain: return "domain";
    case TagMode::kCollapsed: return "collapsed";
  }
  return "none";
}

void ReadMeta(const json& j, MetaConfig& m) {
  Read(j, "m", m.m);
  Read(j, "n", m.n);
  Read(j, "q", m.q);
  Read(j, "k", m.k);
  Read(j, "beta", m.beta);
  if (j.contains("temperature")) m.temperature = TemperatureFromJson(j.at("temperature"));
  Read(j, "epochs", m.epochs);
  Read(j, "seed", m.seed);
  ReadOptimizer(j, m.inner_optimizer);
  Read(j, "inner_batch", m.inner_batch);
  Read(j, "patience", m.patience);
  Read(j, "max_meta_batches", m.max_meta_batches);
  if (j.contains("replacement")) {
    const auto r = j.at("replacement").get<std::string>();
    Require(r == "with" || r == "without", ErrorKind::kConfig, "replacement must be 'with' or 'without'");
    m.replacement = r == "with" ? Replacement::kWith : Replacement::kWithout;
  }
  if (j.contains("tags")) m.tags = ParseTagMode(j.at("tags").get<std::string>());
}

ProtocolSpec ProtocolFromJson(const json& j) {
  ProtocolSpec p;
  if (j.is_string()) {
    p.name = j.get<std::string>();
    return p;
  }
  p.name = j.at("name").get<std::string>();
  if (j.contains("targets"))
    for (const auto& t : j.at("targets")) p.targets.push_back(ParseDlpId(t.get<std::string>()));
  return p;
}

}  // namespace

json ModelConfigToJson(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"model_dim", c.model_dim},     {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},   {"ffn_dim", c.ffn_dim},         {"max_seq_len", c.max_seq_len},
          {"dropout", c.dropout}};
}

json AdapterConfigToJson(const AdapterConfig& c) {
  return {{"bottleneck_dim", c.bottleneck_dim}, {"ln_epsilon", c.ln_epsilon}, {"down_init_range", c.down_init_range}};
}

json MetaConfigToJson(const MetaConfig& m) {
  json j = OptimizerToJson(m.inner_optimizer);
  j["m"] = m.m;
  j["n"] = m.n;
  j["q"] = m.q;
  j["k"] = m.k;
  j["beta"] = m.beta;
  j["temperature"] = TemperatureToJson(m.temperature);
  j["epochs"] = m.epochs;
  j["seed"] = m.seed;
  j["inner_batch"] = m.inner_batch;
  j["patience"] = m.patience;
  j["max_meta_batches"] = m.max_meta_batches;
  j["replacement"] = m.replacement == Replacement::kWith ? "with" : "without";
  j["tags"] = TagModeName(m.tags);
  return j;
}

json StrategyConfigToJson(const StrategyConfig& c) {
  return {{"meta", MetaConfigToJson(c.meta)},
          {"full_model_meta", MetaConfigToJson(c.full_meta)},
          {"pooled_adapter", FitToJson(c.pooled_adapter)},
          {"pooled_full", FitToJson(c.pooled_full)},
          {"stack", FitToJson(c.stack)},
          {"adapt_adapter", AdaptToJson(c.adapt_adapter)},
          {"adapt_full", AdaptToJson(c.adapt_full)},
          {"tag_mode", TagModeName(c.tag_mode)}};
}

json PretrainSettingsToJson(const PretrainSettings& p) {
  json j = FitToJson(p.fit);
  j["dropout"] = p.dropout;
  j["seed"] = p.seed;
  j["min_dev_bleu"] = p.min_dev_bleu;
  return j;
}

void ExperimentConfig::Validate() const {
  world.Validate();
  ModelConfig shape = model;
  shape.vocab_size = 1;  // fixed later by the generated vocabulary
  shape.Validate();
  adapter.Validate(model);
  strategy.meta.Validate();
  strategy.full_meta.Validate();
  Require(!seeds.empty(), ErrorKind::kConfig, "config needs at least one seed");
  Require(!strategies.empty(), ErrorKind::kConfig, "config needs at least one strategy");
  Require(!protocols.empty(), ErrorKind::kConfig, "config needs at least one protocol");
  Require(eval_batch >= 1, ErrorKind::kConfig, "eval_batch must be >= 1");
  for (const auto& p : protocols) {
    const bool rule = p.name == "main" || p.name == "domain-transfer" || p.name == "language-transfer";
    Require(rule || !p.targets.empty(), ErrorKind::kConfig, "protocol '" + p.name + "' needs explicit targets");
  }
  ParseStrategy(reference);
}

const ProtocolSpec& ExperimentConfig::Protocol(const std::string& name) const {
  for (const auto& p : protocols)
    if (p.name == name) return p;
  Fail(ErrorKind::kConfig, "config has no protocol '" + name + "'");
}

void ApplyOverride(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  Require(eq != std::string::npos && eq > 0, ErrorKind::kConfig, "override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &config;
  std::istringstream keys(path);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) parts.push_back(key);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    Require(next.is_object(), ErrorKind::kConfig, "override path crosses a non-object at " + parts[i]);
    node = &next;
  }
  (*node)[parts.back()] = value;
}

ExperimentConfig ExperimentConfigFromJson(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    Read(j, "name", c.name);
    const json& w = j.at("world");
    c.world = w.is_string() ? LoadWorldSpec(base_dir / w.get<std::string>()) : WorldSpecFromJson(w);
    if (j.contains("model")) {
      const json& m = j.at("model");
      Read(m, "model_dim", c.model.model_dim);
      Read(m, "num_layers", c.model.num_layers);
      Read(m, "num_heads", c.model.num_heads);
      Read(m, "ffn_dim", c.model.ffn_dim);
      Read(m, "max_seq_len", c.model.max_seq_len);
      Read(m, "dropout", c.model.dropout);
    }
    if (j.contains("adapter")) {
      const json& a = j.at("adapter");
      Read(a, "bottleneck_dim", c.adapter.bottleneck_dim);
      Read(a, "ln_epsilon", c.adapter.ln_epsilon);
      Read(a, "down_init_range", c.adapter.down_init_range);
    }
    if (j.contains("pretrain")) {
      const json& p = j.at("pretrain");
      ReadFit(p, c.pretrain.fit);
      Read(p, "dropout", c.pretrain.dropout);
      Read(p, "seed", c.pretrain.seed);
      Read(p, "min_dev_bleu", c.pretrain.min_dev_bleu);
    }
    if (j.contains("meta")) ReadMeta(j.at("meta"), c.strategy.meta);
    if (j.contains("full_model_meta")) ReadMeta(j.at("full_model_meta"), c.strategy.full_meta);
    if (j.contains("pooled_adapter")) ReadFit(j.at("pooled_adapter"), c.strategy.pooled_adapter);
    if (j.contains("pooled_full")) ReadFit(j.at("pooled_full"), c.strategy.pooled_full);
    if (j.contains("stack")) ReadFit(j.at("stack"), c.strategy.stack);
    if (j.contains("adapt_adapter")) ReadAdapt(j.at("adapt_adapter"), c.strategy.adapt_adapter);
    if (j.contains("adapt_full")) ReadAdapt(j.at("adapt_full"), c.strategy.adapt_full);
    if (j.contains("tag_mode")) c.strategy.tag_mode = ParseTagMode(j.at("tag_mode").get<std::string>());
    if (j.contains("strategies")) {
      for (const auto& s : j.at("strategies")) c.strategies.push_back(ParseStrategy(s.get<std::string>()));
    } else {
      c.strategies = AllStrategies();
    }
    if (j.contains("protocols")) {
      for (const auto& p : j.at("protocols")) c.protocols.push_back(ProtocolFromJson(p));
    } else {
      c.protocols.push_back({"main", {}});
    }
    Read(j, "seeds", c.seeds);
    Read(j, "reference", c.reference);
    Read(j, "eval_batch", c.eval_batch);
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (s.contains("temperatures"))
        for (const auto& t : s.at("temperatures")) c.sweep.temperatures.push_back(TemperatureFromJson(t));
      Read(s, "shots", c.sweep.shots);
      Read(s, "meta_epochs", c.sweep.meta_epochs);
      Read(s, "seed", c.sweep.seed);
      Read(s, "protocol", c.sweep.protocol);
    }
  } catch (const json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("experiment config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    Fail(ErrorKind::kConfig, std::string("experiment config: ") + e.what());
  }
  c.Validate();
  return c;
}

json ExperimentConfigToJson(const ExperimentConfig& c) {
  json j = StrategyConfigToJson(c.strategy);
  j["name"] = c.name;
  j["world"] = WorldSpecToJson(c.world);
  j["model"] = ModelConfigToJson(c.model);
  j["adapter"] = AdapterConfigToJson(c.adapter);
  j["pretrain"] = PretrainSettingsToJson(c.pretrain);
  j["strategies"] = json::array();
  for (Strategy s : c.strategies) j["strategies"].push_back(std::string(StrategyName(s)));
  j["protocols"] = json::array();
  for (const auto& p : c.protocols) {
    json targets = json::array();
    for (const auto& t : p.targets) targets.push_back(t.ToString());
    j["protocols"].push_back({{"name", p.name}, {"targets", targets}});
  }
  j["seeds"] = c.seeds;
  j["reference"] = c.reference;
  j["eval_batch"] = c.eval_batch;
  json temps = json::array();
  for (const auto& t : c.sweep.temperatures) temps.push_back(TemperatureToJson(t));
  j["sweep"] = {{"temperatures", temps},
                {"shots", c.sweep.shots},
                {"meta_epochs", c.sweep.meta_epochs},
                {"seed", c.sweep.seed},
                {"protocol", c.sweep.protocol}};
  return j;
}

namespace {

// Reads a config file, resolving "extends" (merge-patched over the base)
// and making a "world" path absolute.
json LoadConfigJson(const std::filesystem::path& path, int depth) {
  Require(depth < 8, ErrorKind::kConfig, "config 'extends' chain too deep at " + path.string());
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorKind::kConfig, "cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  Require(j.is_object(), ErrorKind::kConfig, path.string() + ": config must be a JSON object");
  if (j.contains("world") && j.at("world").is_string())
    j["world"] = std::filesystem::absolute(path.parent_path() / j.at("world").get<std::string>()).lexically_normal().string();
  if (!j.contains("extends")) return j;
  Require(j.at("extends").is_string(), ErrorKind::kConfig, path.string() + ": 'extends' must be a path");
  json base = LoadConfigJson(path.parent_path() / j.at("extends").get<std::string>(), depth + 1);
  j.erase("extends");
  base.merge_patch(j);
  return base;
}

}  // namespace

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json j = LoadConfigJson(path, 0);
  for (const auto& o : overrides) ApplyOverride(j, o);
  return ExperimentConfigFromJson(j, path.parent_path());
}

std::string JsonKey(const json& j) {
  return ChecksumHex(HashString(j.dump()));
}

}  // namespace metaadapt
