#pragma once

// Brute-force reference for the fabric. Everything here is recomputed from
// trace records and the configuration alone; nothing calls into fabric.hpp
// beyond reading FabricConfig.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lmf/fabric.hpp"
#include "lmf/trace.hpp"
#include "lmf/types.hpp"

namespace lmf::oracle {

struct DetectionCount {
  // Ticks of every counted detection, for every ordered pair.
  std::map<Pair, std::vector<Tick>> detections;

  std::uint64_t count(const Pair& p) const {
    auto it = detections.find(p);
    return it == detections.end() ? 0 : it->second.size();
  }
};

inline void require_well_formed(std::span<const TraceRecord> trace, const FabricConfig& config) {
  Tick prev = 0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& r = trace[k];
    if (r.t < prev) {
      throw MalformedTrace(k + 1, "tick " + std::to_string(r.t) + " precedes previous tick " + std::to_string(prev));
    }
    prev = r.t;
    if (r.word && !config.contains(*r.word)) {
      throw MalformedTrace(k + 1, "word " + std::to_string(*r.word) + " outside 1.." + std::to_string(config.words));
    }
    if (r.pair && (!config.contains(r.pair->src) || !config.contains(r.pair->dst) || r.pair->src == r.pair->dst)) {
      throw MalformedTrace(k + 1, "invalid pair " + to_string(*r.pair));
    }
  }
}

// Literal window scan per ordered pair. Only enable/done records are read.
inline DetectionCount count_detections(std::span<const TraceRecord> trace, const FabricConfig& config) {
  require_well_formed(trace, config);
  const RecordKind trigger_kind = config.mode == FilterMode::DoneEnable ? RecordKind::Enable : RecordKind::Done;
  DetectionCount out;
  for (WordId i = 1; i <= config.words; ++i) {
    for (WordId j = 1; j <= config.words; ++j) {
      if (i == j) continue;
      auto& hits = out.detections[{i, j}];
      std::optional<Tick> last_done_i;
      std::optional<Tick> last_counted;
      for (const auto& r : trace) {
        if (r.ev == RecordKind::Done && r.word == i) {
          last_done_i = r.t;
          continue;
        }
        if (r.ev != trigger_kind || r.word != j || !last_done_i) continue;
        if (r.t > *last_done_i + config.delay1) continue;
        if (last_counted && r.t - *last_counted < config.delay2) continue;
        hits.push_back(r.t);
        last_counted = r.t;
      }
    }
  }
  return out;
}

inline std::set<Pair> predict_learned(const DetectionCount& counts, std::uint32_t threshold) {
  std::set<Pair> out;
  for (const auto& [p, hits] : counts.detections) {
    if (hits.size() >= threshold) out.insert(p);
  }
  return out;
}

// Tick at which each pair's count reaches the threshold.
inline std::map<Pair, Tick> predict_learned_ticks(const DetectionCount& counts, std::uint32_t threshold) {
  std::map<Pair, Tick> out;
  for (const auto& [p, hits] : counts.detections) {
    if (threshold >= 1 && hits.size() >= threshold) out[p] = hits[threshold - 1];
  }
  return out;
}

// Canonical order within a tick follows the enumerator order.
enum class TimelineKind { Done, OverrideBlocked, LoopSuppressed, Enable, IgnoredEnable };

inline std::string_view to_string(TimelineKind k) {
  switch (k) {
    case TimelineKind::Done: return "done";
    case TimelineKind::OverrideBlocked: return "override_blocked";
    case TimelineKind::LoopSuppressed: return "loop_suppressed";
    case TimelineKind::Enable: return "enable";
    case TimelineKind::IgnoredEnable: return "ignored_enable";
  }
  return "?";
}

struct TimelineEntry {
  Tick tick = 0;
  TimelineKind kind = TimelineKind::Enable;
  WordId word = 0;
  std::optional<Pair> pair;

  friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
  friend bool operator<(const TimelineEntry& a, const TimelineEntry& b) {
    return std::tie(a.tick, a.kind, a.word, a.pair) < std::tie(b.tick, b.kind, b.word, b.pair);
  }
};

inline std::string to_string(const TimelineEntry& e) {
  std::string s = "t=" + std::to_string(e.tick) + " " + std::string(to_string(e.kind)) + " word " + std::to_string(e.word);
  if (e.pair) s += " via " + lmf::to_string(*e.pair);
  return s;
}

using PredictedTimeline = std::vector<TimelineEntry>;

inline void canonicalize(PredictedTimeline& tl) { std::stable_sort(tl.begin(), tl.end()); }

// Replay of one episode started by enabling `start` at `origin`. Pending
// activations are kept in a plain list and the earliest (tick, insertion
// order) is taken each round; successors are expanded in ascending WordId.
inline PredictedTimeline predict_timeline(const std::set<Pair>& learned, const std::set<Pair>& overrides,
                                          WordId start, const FabricConfig& config, Tick origin = 0) {
  struct Pending {
    Tick tick;
    std::size_t order;
    bool is_enable;
    WordId word;
    std::optional<Pair> via;
  };
  PredictedTimeline out;
  std::vector<Pending> agenda;
  std::size_t order = 0;
  std::set<WordId> claimed{start};
  agenda.push_back({origin, order++, true, start, std::nullopt});

  while (!agenda.empty()) {
    auto it = std::min_element(agenda.begin(), agenda.end(), [](const Pending& a, const Pending& b) {
      return std::pair(a.tick, a.order) < std::pair(b.tick, b.order);
    });
    const Pending cur = *it;
    agenda.erase(it);
    if (cur.is_enable) {
      out.push_back({cur.tick, TimelineKind::Enable, cur.word, cur.via});
      agenda.push_back({cur.tick + config.duration(cur.word), order++, false, cur.word, std::nullopt});
      continue;
    }
    out.push_back({cur.tick, TimelineKind::Done, cur.word, std::nullopt});
    for (WordId j = 1; j <= config.words; ++j) {
      const Pair p{cur.word, j};
      if (j == cur.word || !learned.contains(p)) continue;
      if (overrides.contains(p)) {
        out.push_back({cur.tick, TimelineKind::OverrideBlocked, j, p});
      } else if (claimed.contains(j)) {
        out.push_back({cur.tick, TimelineKind::LoopSuppressed, j, p});
      } else {
        claimed.insert(j);
        agenda.push_back({cur.tick + config.delay1, order++, true, j, p});
      }
    }
  }
  canonicalize(out);
  return out;
}

// The episode's enables, dones and routing outcomes as recorded in a trace.
inline PredictedTimeline episode_timeline(std::span<const TraceRecord> trace, EpisodeId episode) {
  PredictedTimeline out;
  for (const auto& r : trace) {
    if (r.episode != episode) continue;
    switch (r.ev) {
      case RecordKind::Enable:
        out.push_back({r.t, TimelineKind::Enable, *r.word, r.src == Source::Auto ? r.pair : std::nullopt});
        break;
      case RecordKind::IgnoredEnable:
        out.push_back({r.t, TimelineKind::IgnoredEnable, *r.word, r.src == Source::Auto ? r.pair : std::nullopt});
        break;
      case RecordKind::Done:
        out.push_back({r.t, TimelineKind::Done, *r.word, std::nullopt});
        break;
      case RecordKind::LoopSuppressed:
        out.push_back({r.t, TimelineKind::LoopSuppressed, *r.word, r.pair});
        break;
      case RecordKind::OverrideBlocked:
        out.push_back({r.t, TimelineKind::OverrideBlocked, *r.word, r.pair});
        break;
      default:
        break;
    }
  }
  canonicalize(out);
  return out;
}

// Pairs learned / overrides open strictly before trace index `end`.
inline std::set<Pair> learned_before(std::span<const TraceRecord> trace, std::size_t end) {
  std::set<Pair> out;
  for (std::size_t k = 0; k < end && k < trace.size(); ++k) {
    if (trace[k].ev == RecordKind::Learned) out.insert(*trace[k].pair);
  }
  return out;
}

inline std::set<Pair> overrides_before(std::span<const TraceRecord> trace, std::size_t end) {
  std::set<Pair> out;
  for (std::size_t k = 0; k < end && k < trace.size(); ++k) {
    const auto& r = trace[k];
    if (r.ev != RecordKind::OverrideSet) continue;
    if (*r.open) {
      out.insert(*r.pair);
    } else {
      out.erase(*r.pair);
    }
  }
  return out;
}

struct EpisodeSpan {
  EpisodeId id = 0;
  std::size_t first = 0;  // trace index
  std::size_t last = 0;
  Tick start = 0;
  Tick end = 0;
  std::uint32_t cpu_enables = 0;
  WordId trigger = 0;
};

inline std::map<EpisodeId, EpisodeSpan> episode_spans(std::span<const TraceRecord> trace) {
  std::map<EpisodeId, EpisodeSpan> out;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& r = trace[k];
    if (!r.episode) continue;
    auto [it, fresh] = out.try_emplace(*r.episode);
    auto& s = it->second;
    if (fresh) {
      s = {*r.episode, k, k, r.t, r.t, 0, r.word.value_or(0)};
    }
    s.last = k;
    s.end = r.t;
    if ((r.ev == RecordKind::Enable || r.ev == RecordKind::IgnoredEnable) && r.src == Source::Cpu) ++s.cpu_enables;
  }
  return out;
}

// An episode can be checked against predict_timeline when it was started by
// a single CPU enable, no other episode overlaps it, no override changes
// inside it, and no pair learned inside it has its source finish afterwards.
inline bool episode_is_comparable(std::span<const TraceRecord> trace, const std::map<EpisodeId, EpisodeSpan>& spans,
                                  EpisodeId id) {
  const auto& s = spans.at(id);
  if (s.cpu_enables != 1) return false;
  for (const auto& [other, o] : spans) {
    if (other != id && o.start <= s.end && s.start <= o.end) return false;
  }
  for (std::size_t k = s.first; k <= s.last; ++k) {
    const auto& r = trace[k];
    if (r.ev == RecordKind::OverrideSet) return false;
    if (r.ev != RecordKind::Learned) continue;
    for (std::size_t m = k + 1; m <= s.last; ++m) {
      if (trace[m].ev == RecordKind::Done && trace[m].episode == id && trace[m].word == r.pair->src) return false;
    }
  }
  return true;
}

struct Divergence {
  std::string check;
  std::size_t line = 0;  // 1-based trace line, 0 when not tied to one
  std::string message;
};

inline std::string to_string(const Divergence& d) {
  std::string s = d.check + ": ";
  if (d.line) s += "trace line " + std::to_string(d.line) + ": ";
  return s + d.message;
}

namespace detail {

// Stage sequence of each register must be 1, 2, ..., n, n, ... and the
// learned record must follow the first shift that reaches n.
inline void check_learning_monotone(std::span<const TraceRecord> trace, const FabricConfig& config,
                                    std::vector<Divergence>& out) {
  std::map<Pair, std::uint32_t> stage;
  std::map<Pair, std::size_t> filled_at;
  std::set<Pair> learned;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& r = trace[k];
    if (r.ev == RecordKind::LatchShift) {
      const std::uint32_t prev = stage[*r.pair];
      const std::uint32_t want = std::min(prev + 1, config.threshold);
      if (*r.stage != want) {
        out.push_back({"monotone", k + 1,
                       "latch shift of " + to_string(*r.pair) + " reports stage " + std::to_string(*r.stage) +
                           ", expected " + std::to_string(want)});
      }
      stage[*r.pair] = std::max(prev, *r.stage);
      if (prev < config.threshold && *r.stage >= config.threshold) filled_at[*r.pair] = k;
    } else if (r.ev == RecordKind::Learned) {
      if (!learned.insert(*r.pair).second) {
        out.push_back({"monotone", k + 1, "pair " + to_string(*r.pair) + " learned twice"});
      }
      auto f = filled_at.find(*r.pair);
      if (f == filled_at.end() || trace[f->second].t != r.t) {
        out.push_back({"monotone", k + 1,
                       "pair " + to_string(*r.pair) + " learned without its register filling at tick " + std::to_string(r.t)});
      }
    }
  }
  for (const auto& [p, k] : filled_at) {
    if (!learned.contains(p)) {
      out.push_back({"monotone", k + 1, "register " + to_string(p) + " filled but no learned record follows"});
    }
  }
}

}  // namespace detail

// Cross-checks a complete run trace. Returns every divergence found, earliest
// trace line first; an empty result means the trace agrees with the oracle.
inline std::vector<Divergence> verify_trace(std::span<const TraceRecord> trace, const FabricConfig& config) {
  std::vector<Divergence> out;
  try {
    require_well_formed(trace, config);
  } catch (const MalformedTrace& e) {
    out.push_back({"order", e.line(), e.what()});
    return out;
  }
  const Tick last_tick = trace.empty() ? 0 : trace.back().t;

  // Word contract: enable -> done after exactly duration, same episode.
  {
    struct Active {
      Tick since;
      EpisodeId episode;
      std::size_t line;
    };
    std::map<WordId, Active> active;
    std::set<std::pair<EpisodeId, WordId>> fired;
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const auto& r = trace[k];
      if (r.ev == RecordKind::Enable) {
        fired.insert({*r.episode, *r.word});
        if (active.contains(*r.word)) {
          out.push_back({"word", k + 1, "enable of busy word " + std::to_string(*r.word)});
        }
        active[*r.word] = {r.t, *r.episode, k + 1};
      } else if (r.ev == RecordKind::IgnoredEnable) {
        if (!active.contains(*r.word) && !fired.contains({*r.episode, *r.word})) {
          out.push_back({"word", k + 1, "ignored enable of idle word " + std::to_string(*r.word)});
        }
      } else if (r.ev == RecordKind::Done) {
        auto it = active.find(*r.word);
        if (it == active.end()) {
          out.push_back({"word", k + 1, "done of word " + std::to_string(*r.word) + " without an enable"});
          continue;
        }
        const Tick want = it->second.since + config.duration(*r.word);
        if (r.t != want || it->second.episode != *r.episode) {
          out.push_back({"word", k + 1,
                         "done of word " + std::to_string(*r.word) + " at tick " + std::to_string(r.t) +
                             ", expected tick " + std::to_string(want) + " in episode " +
                             std::to_string(it->second.episode)});
        }
        active.erase(it);
      }
    }
    for (const auto& [w, a] : active) {
      if (a.since + config.duration(w) <= last_tick) {
        out.push_back({"word", a.line, "word " + std::to_string(w) + " never reports done"});
      }
    }
  }

  // Learning agreement.
  {
    const auto counts = count_detections(trace, config);
    const auto predicted = predict_learned_ticks(counts, config.threshold);
    std::map<Pair, std::pair<Tick, std::size_t>> recorded;
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const auto& r = trace[k];
      if (r.ev == RecordKind::Learned) recorded.try_emplace(*r.pair, r.t, k + 1);
    }
    std::set<Pair> all;
    for (const auto& [p, t] : predicted) all.insert(p);
    for (const auto& [p, t] : recorded) all.insert(p);
    for (const auto& p : all) {
      auto pr = predicted.find(p);
      auto rc = recorded.find(p);
      if (rc == recorded.end()) {
        out.push_back({"learning", 0,
                       "pair " + to_string(p) + " reaches " + std::to_string(config.threshold) +
                           " detections at tick " + std::to_string(pr->second) + " but has no learned record"});
      } else if (pr == predicted.end()) {
        out.push_back({"learning", rc->second.second,
                       "pair " + to_string(p) + " marked learned with only " + std::to_string(counts.count(p)) +
                           " qualifying detections"});
      } else if (pr->second != rc->second.first) {
        out.push_back({"learning", rc->second.second,
                       "pair " + to_string(p) + " learned at tick " + std::to_string(rc->second.first) +
                           ", oracle predicts tick " + std::to_string(pr->second)});
      }
    }
  }

  detail::check_learning_monotone(trace, config, out);

  // Routing at every done, then dispatch of every scheduled auto enable.
  {
    std::set<Pair> learned;
    std::set<Pair> open;
    std::map<EpisodeId, std::set<WordId>> claimed;
    std::set<std::size_t> attributed;
    std::map<std::tuple<Pair, EpisodeId, Tick>, std::vector<std::size_t>> expected_dispatch;

    for (std::size_t k = 0; k < trace.size(); ++k) {
      const auto& r = trace[k];
      switch (r.ev) {
        case RecordKind::Learned:
          learned.insert(*r.pair);
          break;
        case RecordKind::OverrideSet:
          if (*r.open) {
            open.insert(*r.pair);
          } else {
            open.erase(*r.pair);
          }
          break;
        case RecordKind::Enable:
        case RecordKind::IgnoredEnable:
          if (r.src == Source::Cpu) claimed[*r.episode].insert(*r.word);
          break;
        case RecordKind::AutoEnableScheduled:
        case RecordKind::LoopSuppressed:
        case RecordKind::OverrideBlocked:
          if (!attributed.contains(k)) {
            out.push_back({"routing", k + 1, std::string(lmf::to_string(r.ev)) + " for " + to_string(*r.pair) +
                                                 " does not follow a done of word " + std::to_string(r.pair->src)});
          }
          if (r.ev == RecordKind::AutoEnableScheduled) {
            claimed[*r.episode].insert(*r.word);
            expected_dispatch[{*r.pair, *r.episode, r.t + config.delay1}].push_back(k);
          }
          break;
        case RecordKind::Done: {
          const WordId i = *r.word;
          const EpisodeId ep = *r.episode;
          std::vector<std::pair<RecordKind, Pair>> want;
          std::set<WordId> seen_claims = claimed[ep];
          for (WordId j = 1; j <= config.words; ++j) {
            const Pair p{i, j};
            if (j == i || !learned.contains(p)) continue;
            if (open.contains(p)) {
              want.emplace_back(RecordKind::OverrideBlocked, p);
            } else if (seen_claims.contains(j)) {
              want.emplace_back(RecordKind::LoopSuppressed, p);
            } else {
              seen_claims.insert(j);
              want.emplace_back(RecordKind::AutoEnableScheduled, p);
            }
          }
          std::vector<std::pair<RecordKind, Pair>> got;
          for (std::size_t m = k + 1; m < trace.size() && trace[m].t == r.t; ++m) {
            const auto& q = trace[m];
            const bool routing = q.ev == RecordKind::AutoEnableScheduled || q.ev == RecordKind::LoopSuppressed ||
                                 q.ev == RecordKind::OverrideBlocked;
            if (routing && q.episode == ep && q.pair->src == i && !attributed.contains(m)) {
              got.emplace_back(q.ev, *q.pair);
              attributed.insert(m);
            }
          }
          if (got != want) {
            std::string msg = "done of word " + std::to_string(i) + " at tick " + std::to_string(r.t) + " routes to";
            for (const auto& [kind, p] : got) msg += " " + std::string(lmf::to_string(kind)) + to_string(p);
            if (got.empty()) msg += " nothing";
            msg += "; expected";
            for (const auto& [kind, p] : want) msg += " " + std::string(lmf::to_string(kind)) + to_string(p);
            if (want.empty()) msg += " nothing";
            out.push_back({"routing", k + 1, msg});
          }
          break;
        }
        default:
          break;
      }
    }

    for (std::size_t k = 0; k < trace.size(); ++k) {
      const auto& r = trace[k];
      const bool auto_enable = (r.ev == RecordKind::Enable || r.ev == RecordKind::IgnoredEnable) && r.src == Source::Auto;
      if (!auto_enable) continue;
      auto it = expected_dispatch.find({*r.pair, *r.episode, r.t});
      if (it == expected_dispatch.end() || it->second.empty()) {
        out.push_back({"replay", k + 1,
                       "auto enable of word " + std::to_string(*r.word) + " via " + to_string(*r.pair) + " at tick " +
                           std::to_string(r.t) + " has no done of word " + std::to_string(r.pair->src) + " at tick " +
                           (r.t >= config.delay1 ? std::to_string(r.t - config.delay1) : std::string("<0")) +
                           " routing it"});
        continue;
      }
      it->second.pop_back();
    }
    for (const auto& [key, lines] : expected_dispatch) {
      const auto& [pair, ep, tick] = key;
      if (tick > last_tick) continue;
      for (std::size_t line : lines) {
        out.push_back({"replay", line + 1,
                       "auto enable of word " + std::to_string(pair.dst) + " via " + to_string(pair) +
                           " expected at tick " + std::to_string(tick) + " never dispatched"});
      }
    }
  }

  // Episodes: opened by a CPU enable, no word enabled twice, isolated
  // single-trigger episodes match the predicted replay timeline.
  {
    const auto spans = episode_spans(trace);
    for (const auto& [id, s] : spans) {
      const auto& first = trace[s.first];
      const bool cpu_open = (first.ev == RecordKind::Enable || first.ev == RecordKind::IgnoredEnable) &&
                            first.src == Source::Cpu;
      if (!cpu_open) {
        out.push_back({"episode", s.first + 1, "episode " + std::to_string(id) + " does not start with a CPU enable"});
      }
    }
    std::map<std::pair<EpisodeId, WordId>, std::size_t> enables;
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const auto& r = trace[k];
      if (r.ev == RecordKind::Enable && ++enables[{*r.episode, *r.word}] == 2) {
        out.push_back({"episode", k + 1,
                       "word " + std::to_string(*r.word) + " enabled twice in episode " + std::to_string(*r.episode)});
      }
    }
    for (const auto& [id, s] : spans) {
      if (!episode_is_comparable(trace, spans, id)) continue;
      const auto& first = trace[s.first];
      if (first.ev != RecordKind::Enable) continue;
      const auto predicted = predict_timeline(learned_before(trace, s.first), overrides_before(trace, s.first),
                                              *first.word, config, first.t);
      const auto actual = episode_timeline(trace, id);
      if (predicted == actual) continue;
      std::size_t m = 0;
      while (m < predicted.size() && m < actual.size() && predicted[m] == actual[m]) ++m;
      std::string msg = "episode " + std::to_string(id) + " diverges from predicted replay: ";
      msg += m < actual.size() ? "trace has " + to_string(actual[m]) : std::string("trace ends");
      msg += m < predicted.size() ? ", oracle expects " + to_string(predicted[m]) : std::string(", oracle expects nothing");
      out.push_back({"timeline", 0, msg});
    }
  }
  // Whole-trace findings first, then by position in the trace.
  std::stable_sort(out.begin(), out.end(), [](const Divergence& a, const Divergence& b) { return a.line < b.line; });
  return out;
}

// Compares a report document with the oracle's recount of the trace.
inline std::vector<Divergence> verify_report(const nlohmann::json& report, std::span<const TraceRecord> trace,
                                             const FabricConfig& config) {
  std::vector<Divergence> out;
  const auto counts = count_detections(trace, config);
  const auto learned = predict_learned_ticks(counts, config.threshold);
  try {
    std::map<Pair, Tick> rep_learned;
    for (const auto& l : report.at("learned")) {
      rep_learned[{l.at("pair").at(0).get<WordId>(), l.at("pair").at(1).get<WordId>()}] = l.at("tick").get<Tick>();
    }
    if (rep_learned != learned) {
      out.push_back({"report", 0, "learned section disagrees with the oracle recount"});
    }
    std::map<Pair, std::uint64_t> rep_counts;
    for (const auto& d : report.at("detections")) {
      rep_counts[{d.at("pair").at(0).get<WordId>(), d.at("pair").at(1).get<WordId>()}] = d.at("count").get<std::uint64_t>();
    }
    for (const auto& [p, hits] : counts.detections) {
      auto it = rep_counts.find(p);
      const std::uint64_t got = it == rep_counts.end() ? 0 : it->second;
      if (got != hits.size()) {
        out.push_back({"report", 0,
                       "detection count for " + to_string(p) + " is " + std::to_string(got) + ", oracle counts " +
                           std::to_string(hits.size())});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    out.push_back({"report", 0, std::string("malformed report: ") + e.what()});
  }
  return out;
}

}  // namespace lmf::oracle
