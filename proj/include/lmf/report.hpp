#pragma once

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmf/engine.hpp"
#include "lmf/fabric.hpp"

namespace lmf {

struct Report {
  struct LearnedPair {
    Pair pair;
    Tick tick = 0;
    friend bool operator==(const LearnedPair&, const LearnedPair&) = default;
  };
  struct DetectionCount {
    Pair pair;
    std::uint64_t count = 0;
    friend bool operator==(const DetectionCount&, const DetectionCount&) = default;
  };
  struct EpisodeSummary {
    EpisodeId id = 0;
    WordId trigger = 0;
    std::vector<WordId> words;
    Tick start = 0;
    Tick end = 0;
    std::uint32_t cpu_enables_after_trigger = 0;
    friend bool operator==(const EpisodeSummary&, const EpisodeSummary&) = default;
  };

  RunOutcome outcome;
  std::vector<LearnedPair> learned;       // sorted by pair
  std::vector<DetectionCount> detections;  // every ordered pair, sorted
  std::vector<EpisodeSummary> episodes;    // sorted by start tick, then id

  friend bool operator==(const Report&, const Report&) = default;
};

inline Report build_report(const Fabric& fabric, const RunOutcome& outcome) {
  Report r;
  r.outcome = outcome;
  for (const auto& f : fabric.filters()) {
    r.detections.push_back({f.pair, f.reg.shift_count()});
    if (f.learned_tick) r.learned.push_back({f.pair, *f.learned_tick});
  }
  auto by_pair = [](const auto& a, const auto& b) { return a.pair < b.pair; };
  std::sort(r.detections.begin(), r.detections.end(), by_pair);
  std::sort(r.learned.begin(), r.learned.end(), by_pair);

  for (const auto& [id, ep] : fabric.episodes()) {
    r.episodes.push_back({id, ep.trigger, ep.fired, ep.start, ep.end, ep.cpu_enables_after_trigger()});
  }
  std::stable_sort(r.episodes.begin(), r.episodes.end(),
                   [](const auto& a, const auto& b) { return std::pair(a.start, a.id) < std::pair(b.start, b.id); });
  return r;
}

inline nlohmann::ordered_json to_json(const Report& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["outcome"] = r.outcome.quiescent() ? "quiescent" : "tick_limit";
  j["final_tick"] = r.outcome.final_tick;
  j["learned"] = ordered_json::array();
  for (const auto& l : r.learned) {
    j["learned"].push_back(ordered_json{{"pair", {l.pair.src, l.pair.dst}}, {"tick", l.tick}});
  }
  j["detections"] = ordered_json::array();
  for (const auto& d : r.detections) {
    j["detections"].push_back(ordered_json{{"pair", {d.pair.src, d.pair.dst}}, {"count", d.count}});
  }
  j["episodes"] = ordered_json::array();
  for (const auto& e : r.episodes) {
    j["episodes"].push_back(ordered_json{{"episode", e.id},
                                         {"trigger", e.trigger},
                                         {"words", e.words},
                                         {"start", e.start},
                                         {"end", e.end},
                                         {"cpu_enables_after_trigger", e.cpu_enables_after_trigger}});
  }
  return j;
}

inline void write_report(std::ostream& out, const Report& r) {
  out << to_json(r).dump(2) << '\n';
  if (!out) throw Error("failed writing report");
}

}  // namespace lmf
