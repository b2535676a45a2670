#include "metaadapt/meta/strategy.h"

#include <array>
#include <utility>

#include "metaadapt/core/error.h"

namespace metaadapt {
namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 8> kNames{{
    {Strategy::kM4Adapter, "m4adapter"},
    {Strategy::kFullFt, "full-ft"},
    {Strategy::kTagFt, "tag-ft"},
    {Strategy::kAgnosticAdapter, "agnostic-adapter"},
    {Strategy::kStackAdapter, "stack-adapter"},
    {Strategy::kFullModelMeta, "full-model-meta"},
    {Strategy::kRandomAdapter, "random-adapter"},
    {Strategy::kZeroShot, "zero-shot"},
}};

}  // namespace

std::string_view StrategyName(Strategy s) {
  for (const auto& [k, name] : kNames)
    if (k == s) return name;
  return "unknown";
}

Strategy ParseStrategy(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  Fail(ErrorKind::kConfig, "unknown strategy '" + std::string(name) + "'");
}

const std::vector<Strategy>& AllStrategies() {
  static const std::vector<Strategy> all = [] {
    std::vector<Strategy> v;
    for (const auto& [k, n] : kNames) v.push_back(k);
    return v;
  }();
  return all;
}

bool IsBaseline(Strategy s) {
  return s == Strategy::kFullFt || s == Strategy::kTagFt || s == Strategy::kAgnosticAdapter ||
         s == Strategy::kStackAdapter || s == Strategy::kFullModelMeta;
}

bool FreezesBackbone(Strategy s) {
  return !(s == Strategy::kFullFt || s == Strategy::kTagFt || s == Strategy::kFullModelMeta);
}

}  // namespace metaadapt
