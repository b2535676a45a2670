#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace metaadapt {

// Training strategies compared in the meta-adaptation stage. The first
// five after kM4Adapter are the baselines proper; random-adapter and
// zero-shot are the reference points of the directional comparison.
enum class Strategy {
  kM4Adapter,
  kFullFt,
  kTagFt,
  kAgnosticAdapter,
  kStackAdapter,
  kFullModelMeta,
  kRandomAdapter,
  kZeroShot,
};

std::string_view StrategyName(Strategy s);
// Config error for unknown names.
Strategy ParseStrategy(std::string_view name);
const std::vector<Strategy>& AllStrategies();

bool IsBaseline(Strategy s);
// Strategies whose training leaves the backbone frozen.
bool FreezesBackbone(Strategy s);

}  // namespace metaadapt
