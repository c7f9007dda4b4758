#pragma once

#include <cstddef>
#include <optional>
#include <variant>

#include "lmf/engine.hpp"
#include "lmf/types.hpp"

namespace lmf {

// Enable issued by working memory. Without an episode the dispatch opens a
// fresh one; rehearsal plans pass their repetition's episode for later words.
struct CpuEnable {
  WordId word = 0;
  std::optional<EpisodeId> episode;
  std::optional<std::size_t> plan;
};

// Enable routed through a closed switch S_ij after Delay 1.
struct AutoEnable {
  WordId word = 0;
  Pair source;
  EpisodeId episode = 0;
};

struct WordDone {
  WordId word = 0;
};

// Scenario-scheduled toggle of the series switch on S_ij.
struct OverrideSet {
  Pair pair;
  bool open = false;
};

using Payload = std::variant<CpuEnable, AutoEnable, WordDone, OverrideSet>;
using SimEvent = Event<Payload>;
using SimQueue = EventQueue<Payload>;

}  // namespace lmf
