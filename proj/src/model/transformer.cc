#include "metaadapt/model/transformer.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "metaadapt/core/error.h"
#include "metaadapt/tensor/checkpoint.h"
#include "metaadapt/tensor/ops.h"

namespace metaadapt {
namespace {

constexpr std::uint64_t kBackboneStream = 1;
constexpr std::uint64_t kBankStream = 2;

std::string Layer(const char* stack, std::size_t l) { return std::string(stack) + "." + std::to_string(l); }

bool StartsWith(const std::string& s, const std::string& prefix) {
  return s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0 && s[prefix.size()] == '.';
}

std::vector<std::string> AdapterSites(const ModelConfig& c) {
  std::vector<std::string> sites;
  for (std::size_t l = 0; l < c.num_layers; ++l) sites.push_back(Layer("enc", l));
  for (std::size_t l = 0; l < c.num_layers; ++l) sites.push_back(Layer("dec", l));
  return sites;
}

}  // namespace

void ModelConfig::Validate() const {
  Require(vocab_size >= 1 && model_dim >= 1 && num_layers >= 1 && num_heads >= 1 && ffn_dim >= 1 &&
              max_seq_len >= 1,
          ErrorKind::kConfig, "model dimensions must all be >= 1");
  Require(model_dim % num_heads == 0, ErrorKind::kConfig,
          "model_dim " + std::to_string(model_dim) + " not divisible by num_heads " +
              std::to_string(num_heads));
  Require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig, "dropout must be in [0, 1)");
}

void AdapterConfig::Validate(const ModelConfig& model) const {
  Require(bottleneck_dim >= 1 && bottleneck_dim < model.model_dim, ErrorKind::kConfig,
          "bottleneck_dim must satisfy 1 <= b < model_dim");
  Require(ln_epsilon > 0.0, ErrorKind::kConfig, "adapter ln_epsilon must be positive");
  Require(down_init_range >= 0.0, ErrorKind::kConfig, "down_init_range must be >= 0");
}

std::size_t AdapterParamCount(const ModelConfig& m, const AdapterConfig& a) {
  const std::size_t d = m.model_dim;
  const std::size_t b = a.bottleneck_dim;
  return 2 * d * b + 2 * d + b + d;
}

Model::Model(const ModelConfig& config, const AdapterConfig& adapter_config, std::uint64_t seed)
    : config_(config), adapter_config_(adapter_config) {
  config_.Validate();
  adapter_config_.Validate(config_);
  const std::size_t d = config_.model_dim;
  positional_.assign(config_.max_seq_len * d, 0.0);
  for (std::size_t pos = 0; pos < config_.max_seq_len; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      positional_[pos * d + i] = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < d) positional_[pos * d + i + 1] = std::cos(static_cast<double>(pos) * freq);
    }
  }
  Rng rng(DeriveSeed(seed, {kBackboneStream}));
  InitBackbone(rng);
  AddAdapterBank(kPrimaryBank, seed);
  active_ = {kPrimaryBank};

  const ParamPartition part = Partition();
  Require(part.backbone.size() + part.adapters.size() == params_.size(), ErrorKind::kState,
          "parameter partition does not cover the model");
}

void Model::InitBackbone(Rng& rng) {
  const std::size_t d = config_.model_dim;
  const std::size_t f = config_.ffn_dim;
  const std::size_t v = config_.vocab_size;
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    Tensor w({in, out});
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& x : w.data()) x = rng.Uniform(-limit, limit);
    params_[name + ".w"] = std::move(w);
    params_[name + ".b"] = Tensor({out});
  };
  auto norm = [&](const std::string& name) {
    params_[name + ".g"] = Tensor({d}, 1.0);
    params_[name + ".b"] = Tensor({d});
  };
  auto attention = [&](const std::string& name) {
    for (const char* p : {".q", ".k", ".v", ".o"}) linear(name + p, d, d);
  };

  Tensor embed({v, d});
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& x : embed.data()) x = rng.Normal(0.0, scale);
  params_["embed"] = std::move(embed);
  params_["out_bias"] = Tensor({v});

  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = Layer("enc", l);
    norm(p + ".ln1");
    attention(p + ".self");
    norm(p + ".ln2");
    linear(p + ".ffn.in", d, f);
    linear(p + ".ffn.out", f, d);
  }
  norm("enc.final");
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = Layer("dec", l);
    norm(p + ".ln1");
    attention(p + ".self");
    norm(p + ".ln2");
    attention(p + ".cross");
    norm(p + ".ln3");
    linear(p + ".ffn.in", d, f);
    linear(p + ".ffn.out", f, d);
  }
  norm("dec.final");
}

void Model::InitBank(const std::string& bank, Rng& rng) {
  const std::size_t d = config_.model_dim;
  const std::size_t b = adapter_config_.bottleneck_dim;
  const double r = adapter_config_.down_init_range;
  for (const std::string& site : AdapterSites(config_)) {
    const std::string p = bank + "." + site;
    params_[p + ".ln.g"] = Tensor({d}, 1.0);
    params_[p + ".ln.b"] = Tensor({d});
    Tensor down({d, b});
    for (double& x : down.data()) x = rng.Uniform(-r, r);
    params_[p + ".down.w"] = std::move(down);
    params_[p + ".down.b"] = Tensor({b});
    params_[p + ".up.w"] = Tensor({b, d});
    params_[p + ".up.b"] = Tensor({d});
  }
}

void Model::AddAdapterBank(const std::string& bank, std::uint64_t seed) {
  Require(bank.rfind(kPrimaryBank, 0) == 0 && bank.find('.') == std::string::npos,
          ErrorKind::kConfig, "adapter bank names start with 'adapter' and contain no '.': " + bank);
  Require(!HasAdapterBank(bank), ErrorKind::kConfig, "adapter bank exists: " + bank);
  Rng rng(DeriveSeed(seed, {kBankStream, HashString(bank)}));
  InitBank(bank, rng);
  banks_.push_back(bank);
}

bool Model::HasAdapterBank(const std::string& bank) const {
  return std::find(banks_.begin(), banks_.end(), bank) != banks_.end();
}

void Model::ResetAdapterBank(const std::string& bank, std::uint64_t seed) {
  Require(HasAdapterBank(bank), ErrorKind::kState, "unknown adapter bank: " + bank);
  std::vector<bool> trainable;
  const auto names = BankParamNames(bank);
  for (const auto& n : names) trainable.push_back(params_.at(n).requires_grad());
  Rng rng(DeriveSeed(seed, {kBankStream, HashString(bank)}));
  InitBank(bank, rng);
  for (std::size_t i = 0; i < names.size(); ++i) params_.at(names[i]).set_requires_grad(trainable[i]);
}

void Model::SetActiveBanks(std::vector<std::string> banks) {
  for (const auto& b : banks) Require(HasAdapterBank(b), ErrorKind::kState, "unknown adapter bank: " + b);
  active_ = std::move(banks);
}

std::vector<std::string> Model::BankParamNames(const std::string& bank) const {
  std::vector<std::string> names;
  for (const auto& [name, t] : params_)
    if (StartsWith(name, bank)) names.push_back(name);
  return names;
}

std::vector<std::string> Model::BackboneNames() const {
  std::vector<std::string> names;
  for (const auto& [name, t] : params_) {
    const bool in_bank = std::any_of(banks_.begin(), banks_.end(),
                                     [&](const std::string& b) { return StartsWith(name, b); });
    if (!in_bank) names.push_back(name);
  }
  return names;
}

ParamPartition Model::Partition() const {
  ParamPartition part;
  part.backbone = BackboneNames();
  for (const auto& bank : banks_) {
    auto names = BankParamNames(bank);
    part.adapters.insert(part.adapters.end(), names.begin(), names.end());
  }
  std::sort(part.adapters.begin(), part.adapters.end());
  std::vector<std::string> overlap;
  std::set_intersection(part.backbone.begin(), part.backbone.end(), part.adapters.begin(),
                        part.adapters.end(), std::back_inserter(overlap));
  Require(overlap.empty(), ErrorKind::kState, "parameter partition overlaps at " +
                                                  (overlap.empty() ? std::string() : overlap.front()));
  return part;
}

std::size_t Model::TotalParamCount() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

ParamMap Model::GetAdapterParams(const std::string& bank) const {
  Require(HasAdapterBank(bank), ErrorKind::kState, "unknown adapter bank: " + bank);
  ParamMap out;
  for (const auto& name : BankParamNames(bank)) {
    Tensor value(params_.at(name).shape(), std::vector<double>(params_.at(name).data().begin(),
                                                               params_.at(name).data().end()));
    out.emplace(name.substr(bank.size() + 1), std::move(value));
  }
  return out;
}

void Model::SetAdapterParams(const ParamMap& values, const std::string& bank) {
  Require(HasAdapterBank(bank), ErrorKind::kState, "unknown adapter bank: " + bank);
  const auto names = BankParamNames(bank);
  Require(names.size() == values.size(), ErrorKind::kState,
          "adapter snapshot has " + std::to_string(values.size()) + " tensors, layout expects " +
              std::to_string(names.size()));
  for (const auto& name : names) {
    auto it = values.find(name.substr(bank.size() + 1));
    Require(it != values.end(), ErrorKind::kState, "adapter snapshot lacks " + name);
    Tensor& dst = params_.at(name);
    Require(it->second.shape() == dst.shape(), ErrorKind::kState, "adapter snapshot shape mismatch at " + name);
    std::copy(it->second.data().begin(), it->second.data().end(), dst.data().begin());
  }
}

ParamMap Model::BackboneParams() const { return GetParams(BackboneNames()); }

ParamMap Model::GetParams(const std::vector<std::string>& names) const {
  ParamMap out;
  for (const auto& name : names) {
    auto it = params_.find(name);
    Require(it != params_.end(), ErrorKind::kState, "unknown parameter " + name);
    out.emplace(name, Tensor(it->second.shape(), it->second.storage()));
  }
  return out;
}

void Model::SetParams(const ParamMap& values) {
  for (const auto& [name, value] : values) {
    auto it = params_.find(name);
    Require(it != params_.end(), ErrorKind::kState, "unknown parameter " + name);
    Require(it->second.shape() == value.shape(), ErrorKind::kState, "shape mismatch at " + name);
    std::copy(value.data().begin(), value.data().end(), it->second.data().begin());
  }
}

std::uint64_t Model::BackboneChecksum() const { return Checksum(BackboneParams()); }

void Model::FreezeAll() {
  for (auto& [name, t] : params_) {
    t.set_requires_grad(false);
    t.ClearGrad();
  }
}

void Model::SetBackboneTrainable(bool trainable) {
  for (const auto& name : BackboneNames()) params_.at(name).set_requires_grad(trainable);
}

void Model::SetBankTrainable(const std::string& bank, bool trainable) {
  Require(HasAdapterBank(bank), ErrorKind::kState, "unknown adapter bank: " + bank);
  for (const auto& name : BankParamNames(bank)) params_.at(name).set_requires_grad(trainable);
}

std::vector<Tensor*> Model::TrainableParams() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : params_)
    if (t.requires_grad()) out.push_back(&t);
  return out;
}

std::vector<std::string> Model::TrainableNames() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : params_)
    if (t.requires_grad()) out.push_back(name);
  return out;
}

std::size_t Model::TrainableCount() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_)
    if (t.requires_grad()) n += t.size();
  return n;
}

void Model::ClearGrads() {
  for (auto& [name, t] : params_) t.ClearGrad();
}

Var Model::P(Tape& tape, const std::string& name) { return tape.Leaf(params_.at(name)); }

Var Model::Embed(Tape& tape, Var table, std::span<const int> ids, std::size_t batch, std::size_t len,
                 const ForwardOptions& options) {
  Require(len <= config_.max_seq_len, ErrorKind::kInput,
          "sequence length " + std::to_string(len) + " exceeds max_seq_len");
  const std::size_t d = config_.model_dim;
  Tensor pos({batch * len, d});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(positional_.begin(), len * d, pos.data().begin() + b * len * d);
  Var x = ops::Scale(ops::Embedding(table, ids), std::sqrt(static_cast<double>(d)));
  x = ops::Add(x, tape.Constant(std::move(pos)));
  if (options.train && config_.dropout > 0.0) x = ops::Dropout(x, config_.dropout, *options.dropout_rng);
  return x;
}

Var Model::ApplyAdapters(Tape& tape, Var h, const std::string& site) {
  for (const auto& bank : active_) {
    const std::string p = bank + "." + site;
    AdapterVars a{P(tape, p + ".ln.g"), P(tape, p + ".ln.b"), P(tape, p + ".down.w"),
                  P(tape, p + ".down.b"), P(tape, p + ".up.w"),  P(tape, p + ".up.b")};
    h = AdapterForward(h, a, adapter_config_.ln_epsilon);
  }
  return h;
}

Var Model::Encode(Tape& tape, std::span<const int> src, std::span<const std::uint8_t> src_valid,
                  std::size_t batch, std::size_t src_len, const ForwardOptions& options, Var embed) {
  const double eps = 1e-5;
  const ops::AttentionShape self{batch, src_len, src_len, config_.num_heads};
  auto dropout = [&](Var v) {
    return options.train && config_.dropout > 0.0 ? ops::Dropout(v, config_.dropout, *options.dropout_rng) : v;
  };
  auto linear = [&](Var v, const std::string& n) {
    return ops::AddBias(ops::MatMul(v, P(tape, n + ".w")), P(tape, n + ".b"));
  };
  auto norm = [&](Var v, const std::string& n) {
    return ops::LayerNorm(v, P(tape, n + ".g"), P(tape, n + ".b"), eps);
  };

  Var x = Embed(tape, embed, src, batch, src_len, options);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = Layer("enc", l);
    Var h = norm(x, p + ".ln1");
    Var att = ops::Attention(linear(h, p + ".self.q"), linear(h, p + ".self.k"), linear(h, p + ".self.v"),
                             self, src_valid, false);
    x = ops::Add(x, dropout(linear(att, p + ".self.o")));
    h = norm(x, p + ".ln2");
    Var ff = linear(ops::Relu(linear(h, p + ".ffn.in")), p + ".ffn.out");
    x = ops::Add(x, dropout(ff));
    x = ApplyAdapters(tape, x, p);
  }
  return norm(x, "enc.final");
}

Var Model::Decode(Tape& tape, Var memory, std::span<const std::uint8_t> src_valid,
                  std::span<const int> tgt_in, std::span<const std::uint8_t> tgt_valid, std::size_t batch,
                  std::size_t src_len, std::size_t tgt_len, const ForwardOptions& options, Var embed) {
  const double eps = 1e-5;
  const ops::AttentionShape self{batch, tgt_len, tgt_len, config_.num_heads};
  const ops::AttentionShape cross{batch, tgt_len, src_len, config_.num_heads};
  auto dropout = [&](Var v) {
    return options.train && config_.dropout > 0.0 ? ops::Dropout(v, config_.dropout, *options.dropout_rng) : v;
  };
  auto linear = [&](Var v, const std::string& n) {
    return ops::AddBias(ops::MatMul(v, P(tape, n + ".w")), P(tape, n + ".b"));
  };
  auto norm = [&](Var v, const std::string& n) {
    return ops::LayerNorm(v, P(tape, n + ".g"), P(tape, n + ".b"), eps);
  };

  Var y = Embed(tape, embed, tgt_in, batch, tgt_len, options);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = Layer("dec", l);
    Var h = norm(y, p + ".ln1");
    Var att = ops::Attention(linear(h, p + ".self.q"), linear(h, p + ".self.k"), linear(h, p + ".self.v"),
                             self, tgt_valid, true);
    y = ops::Add(y, dropout(linear(att, p + ".self.o")));
    h = norm(y, p + ".ln2");
    Var ctx = ops::Attention(linear(h, p + ".cross.q"), linear(memory, p + ".cross.k"),
                             linear(memory, p + ".cross.v"), cross, src_valid, false);
    y = ops::Add(y, dropout(linear(ctx, p + ".cross.o")));
    h = norm(y, p + ".ln3");
    Var ff = linear(ops::Relu(linear(h, p + ".ffn.in")), p + ".ffn.out");
    y = ops::Add(y, dropout(ff));
    y = ApplyAdapters(tape, y, p);
  }
  y = norm(y, "dec.final");
  return ops::AddBias(ops::MatMulNT(y, embed), P(tape, "out_bias"));
}

Var Model::Logits(Tape& tape, const Batch& batch, const ForwardOptions& options) {
  Require(!batch.empty(), ErrorKind::kInput, "forward on an empty batch");
  Require(!options.train || config_.dropout == 0.0 || options.dropout_rng != nullptr, ErrorKind::kState,
          "training forward needs a dropout rng");
  Var embed = P(tape, "embed");
  Var memory = Encode(tape, batch.src, batch.src_valid, batch.size, batch.src_len, options, embed);
  return Decode(tape, memory, batch.src_valid, batch.tgt_in, batch.tgt_valid, batch.size, batch.src_len,
                batch.tgt_len, options, embed);
}

Var Model::ForwardLoss(Tape& tape, const Batch& batch, const ForwardOptions& options) {
  Var logits = Logits(tape, batch, options);
  return ops::CrossEntropy(logits, batch.tgt_out, kPadId);
}

std::vector<std::vector<int>> Model::GreedyDecode(const std::vector<std::vector<int>>& source_rows,
                                                  std::size_t max_len) {
  Require(max_len >= 1, ErrorKind::kInput, "max_len must be >= 1");
  std::vector<std::vector<int>> outputs(source_rows.size());
  if (source_rows.empty()) return outputs;
  const std::size_t batch = source_rows.size();
  std::size_t src_len = 0;
  for (const auto& row : source_rows) {
    Require(!row.empty(), ErrorKind::kInput, "empty source row");
    src_len = std::max(src_len, row.size());
  }
  std::vector<int> src(batch * src_len, kPadId);
  std::vector<std::uint8_t> src_valid(batch * src_len, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(source_rows[b].begin(), source_rows[b].end(), src.begin() + b * src_len);
    std::fill_n(src_valid.begin() + b * src_len, source_rows[b].size(), 1);
  }

  Tape tape;
  NoGradGuard guard(tape);
  const ForwardOptions eval{};
  Tensor memory = Encode(tape, src, src_valid, batch, src_len, eval, P(tape, "embed")).value();

  const std::size_t steps = std::min(max_len + 1, config_.max_seq_len);
  std::vector<bool> done(batch, false);
  std::vector<std::vector<int>> prefix(batch, std::vector<int>{kBosId});
  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t len = step + 1;
    std::vector<int> tgt_in(batch * len, kPadId);
    std::vector<std::uint8_t> tgt_valid(batch * len, 1);
    for (std::size_t b = 0; b < batch; ++b) std::copy(prefix[b].begin(), prefix[b].end(), tgt_in.begin() + b * len);
    tape.Reset();
    Var embed = P(tape, "embed");
    Var logits = Decode(tape, tape.Constant(memory), src_valid, tgt_in, tgt_valid, batch, src_len, len, eval, embed);
    const Tensor& z = logits.value();
    const std::size_t vocab = z.cols();
    bool all_done = true;
    for (std::size_t b = 0; b < batch; ++b) {
      if (done[b]) {
        prefix[b].push_back(kPadId);
        continue;
      }
      const double* row = z.data().data() + (b * len + step) * vocab;
      const int best = static_cast<int>(std::max_element(row, row + vocab) - row);
      prefix[b].push_back(best);
      if (best == kEosId || outputs[b].size() == max_len) {
        done[b] = true;
      } else {
        outputs[b].push_back(best);
        if (outputs[b].size() == max_len) done[b] = true;
      }
      all_done = all_done && done[b];
    }
    if (all_done) break;
  }
  return outputs;
}

}  // namespace metaadapt
