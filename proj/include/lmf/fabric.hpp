#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmf/events.hpp"
#include "lmf/trace.hpp"
#include "lmf/types.hpp"

namespace lmf {

// Which pair of signals the timing filter ANDs: done_i with enable_j, or
// done_i with done_j.
enum class FilterMode { DoneEnable, DoneDone };

inline std::string_view to_string(FilterMode m) {
  return m == FilterMode::DoneEnable ? "done_enable" : "done_done";
}

struct FabricConfig {
  WordId words = 0;
  Tick delay1 = 0;
  Tick delay2 = 0;
  std::uint32_t threshold = 0;
  std::map<WordId, Tick> durations;
  FilterMode mode = FilterMode::DoneEnable;
  // Test hook only. With this off, done never checks the episode and a
  // learned cycle replays until the tick limit.
  bool loop_suppression = true;

  bool contains(WordId w) const noexcept { return w >= 1 && w <= words; }

  Tick duration(WordId w) const {
    auto it = durations.find(w);
    if (it == durations.end()) throw UnknownWord("no duration for word " + std::to_string(w));
    return it->second;
  }

  void validate() const {
    if (words < 2) throw InvalidConfig("fabric needs at least 2 words (words=" + std::to_string(words) + ")");
    if (delay1 < 1) throw InvalidConfig("delay1 must be >= 1");
    if (delay2 < 1) throw InvalidConfig("delay2 must be >= 1");
    if (delay2 > delay1) {
      throw InvalidConfig("delay2 (" + std::to_string(delay2) + ") must not exceed delay1 (" +
                          std::to_string(delay1) + ")");
    }
    if (threshold < 1) throw InvalidConfig("threshold must be >= 1");
    for (WordId w = 1; w <= words; ++w) {
      auto it = durations.find(w);
      if (it == durations.end()) throw InvalidConfig("missing duration for word " + std::to_string(w));
      if (it->second < 1) throw InvalidConfig("duration of word " + std::to_string(w) + " must be >= 1");
    }
    for (const auto& [w, d] : durations) {
      if (!contains(w)) throw InvalidConfig("duration given for unknown word " + std::to_string(w));
    }
  }

  friend bool operator==(const FabricConfig&, const FabricConfig&) = default;
};

// n set-once latches D_1..D_n. A shift moves every true value one stage
// toward D_n and sets D_1; stages are never cleared.
class LearnRegister {
 public:
  enum class ShiftResult { Refractory, Shifted, Filled };

  explicit LearnRegister(std::uint32_t depth) : stages_(depth, false) {}

  // `refractory` is the spike width: a second shift closer than that to the
  // previous one is the same spike and has no effect.
  ShiftResult shift(Tick tick, Tick refractory) {
    if (last_shift_ && tick - *last_shift_ < refractory) return ShiftResult::Refractory;
    last_shift_ = tick;
    ++shifts_;
    const bool was_full = full();
    for (std::size_t k = stages_.size() - 1; k >= 1; --k) {
      stages_[k] = stages_[k] || stages_[k - 1];
    }
    stages_[0] = true;
    return !was_full && full() ? ShiftResult::Filled : ShiftResult::Shifted;
  }

  std::uint32_t depth() const noexcept { return static_cast<std::uint32_t>(stages_.size()); }
  // 1-based, matching D_1..D_n.
  bool stage(std::uint32_t k) const { return stages_.at(k - 1); }
  bool full() const noexcept { return stages_.back(); }
  std::uint32_t set_count() const noexcept {
    std::uint32_t n = 0;
    for (bool s : stages_) n += s ? 1 : 0;
    return n;
  }
  std::optional<Tick> last_shift_tick() const noexcept { return last_shift_; }
  std::uint64_t shift_count() const noexcept { return shifts_; }

 private:
  std::vector<bool> stages_;
  std::optional<Tick> last_shift_;
  std::uint64_t shifts_ = 0;
};

struct TimingFilter {
  Pair pair;
  // done tick of pair.src + delay1, once src has finished at least once.
  std::optional<Tick> window_open_until;
  LearnRegister reg;
  std::optional<Tick> learned_tick;

  // Windows are closed intervals [done, done + delay1] and only open at a
  // done, so anything dispatched later qualifies up to the right edge.
  bool window_contains(Tick t) const noexcept { return window_open_until && t <= *window_open_until; }
};

// S_ij: learned connections plus the series override switch on each.
class SwitchMatrix {
 public:
  void close(const Pair& p) { learned_.insert(p); }
  void set_override(const Pair& p, bool open) {
    if (open) {
      open_.insert(p);
    } else {
      open_.erase(p);
    }
  }

  bool learned(const Pair& p) const { return learned_.contains(p); }
  bool override_open(const Pair& p) const { return open_.contains(p); }
  const std::set<Pair>& learned_pairs() const noexcept { return learned_; }
  const std::set<Pair>& open_overrides() const noexcept { return open_; }

 private:
  std::set<Pair> learned_;
  std::set<Pair> open_;
};

struct WordState {
  WordId id = 0;
  std::optional<Tick> busy_until;
  std::optional<EpisodeId> episode;
};

// One activation chain rooted at a CPU enable. `claimed` holds every word
// enabled in the episode or already scheduled to be; a claimed word is never
// routed to again.
struct Episode {
  EpisodeId id = 0;
  WordId trigger = 0;
  Tick start = 0;
  Tick end = 0;
  std::set<WordId> claimed;
  std::vector<WordId> fired;
  std::uint32_t cpu_enables = 0;

  std::uint32_t cpu_enables_after_trigger() const noexcept {
    return cpu_enables == 0 ? 0 : cpu_enables - 1;
  }
};

using TraceLog = std::vector<TraceRecord>;

enum class EnableResult { Enabled, IgnoredBusy, IgnoredRepeat };

class Fabric {
 public:
  explicit Fabric(FabricConfig config) : config_(std::move(config)) {
    config_.validate();
    words_.reserve(config_.words);
    for (WordId w = 1; w <= config_.words; ++w) words_.push_back(WordState{w, {}, {}});
    filters_.reserve(static_cast<std::size_t>(config_.words) * (config_.words - 1));
    for (WordId i = 1; i <= config_.words; ++i) {
      for (WordId j = 1; j <= config_.words; ++j) {
        if (i != j) filters_.push_back(TimingFilter{{i, j}, {}, LearnRegister(config_.threshold), {}});
      }
    }
  }

  const FabricConfig& config() const noexcept { return config_; }
  std::size_t filter_count() const noexcept { return filters_.size(); }
  const std::vector<TimingFilter>& filters() const noexcept { return filters_; }
  const TimingFilter& filter(const Pair& p) const { return filters_[filter_index(p)]; }
  const WordState& word(WordId w) const {
    check_word(w);
    return words_[w - 1];
  }
  const SwitchMatrix& switches() const noexcept { return switches_; }
  std::set<Pair> learned_set() const { return switches_.learned_pairs(); }
  const std::map<EpisodeId, Episode>& episodes() const noexcept { return episodes_; }
  const Episode& episode(EpisodeId id) const { return episodes_.at(id); }

  void set_override(const Pair& p, bool open) {
    check_pair(p);
    switches_.set_override(p, open);
  }

  EpisodeId open_episode(WordId trigger, Tick tick) {
    check_word(trigger);
    const EpisodeId id = next_episode_++;
    episodes_.emplace(id, Episode{id, trigger, tick, tick, {}, {}, 0});
    return id;
  }

  // `via` is the switch that routed an autonomous enable.
  // A busy word ignores the enable. So does a word that already fired in
  // this episode, which only happens when CPU and replay race for it.
  EnableResult on_enable(WordId w, Tick tick, Source source, std::optional<Pair> via, EpisodeId ep_id,
                         SimQueue& queue, TraceLog& trace) {
    check_word(w);
    Episode& ep = episodes_.at(ep_id);
    if (source == Source::Cpu) {
      ++ep.cpu_enables;
      ep.claimed.insert(w);
    }
    WordState& ws = words_[w - 1];
    const bool busy = ws.busy_until.has_value();
    const bool repeat =
        config_.loop_suppression && std::find(ep.fired.begin(), ep.fired.end(), w) != ep.fired.end();
    if (busy || repeat) {
      emit(trace, ep, {.t = tick, .ev = RecordKind::IgnoredEnable, .word = w, .pair = via, .src = source,
                       .episode = ep_id});
      return busy ? EnableResult::IgnoredBusy : EnableResult::IgnoredRepeat;
    }
    ws.busy_until = tick + config_.duration(w);
    ws.episode = ep_id;
    queue.schedule(*ws.busy_until, WordDone{w});
    ep.fired.push_back(w);
    emit(trace, ep, {.t = tick, .ev = RecordKind::Enable, .word = w, .pair = via, .src = source,
                     .episode = ep_id});

    if (config_.mode == FilterMode::DoneEnable) detect_into(w, tick, trace);
    return EnableResult::Enabled;
  }

  void on_done(WordId w, Tick tick, SimQueue& queue, TraceLog& trace) {
    check_word(w);
    WordState& ws = words_[w - 1];
    if (!ws.busy_until || *ws.busy_until != tick || !ws.episode) {
      throw Error("done of word " + std::to_string(w) + " at tick " + std::to_string(tick) +
                  " does not match an activation");
    }
    const EpisodeId ep_id = *ws.episode;
    Episode& ep = episodes_.at(ep_id);
    ws.busy_until.reset();
    ws.episode.reset();
    emit(trace, ep, {.t = tick, .ev = RecordKind::Done, .word = w, .episode = ep_id});

    for (WordId j = 1; j <= config_.words; ++j) {
      if (j != w) filters_[filter_index({w, j})].window_open_until = tick + config_.delay1;
    }
    if (config_.mode == FilterMode::DoneDone) detect_into(w, tick, trace);

    for (WordId j = 1; j <= config_.words; ++j) {
      const Pair p{w, j};
      if (j == w || !switches_.learned(p)) continue;
      TraceRecord rec{.t = tick, .word = j, .pair = p, .episode = ep_id};
      if (switches_.override_open(p)) {
        rec.ev = RecordKind::OverrideBlocked;
      } else if (config_.loop_suppression && ep.claimed.contains(j)) {
        rec.ev = RecordKind::LoopSuppressed;
      } else {
        ep.claimed.insert(j);
        queue.schedule(tick + config_.delay1, AutoEnable{j, p, ep_id});
        rec.ev = RecordKind::AutoEnableScheduled;
      }
      emit(trace, ep, rec);
    }
  }

  void apply_override(const Pair& p, bool open, Tick tick, TraceLog& trace) {
    set_override(p, open);
    trace.push_back({.t = tick, .ev = RecordKind::OverrideSet, .pair = p, .open = open});
  }

 private:
  std::size_t filter_index(const Pair& p) const {
    check_pair(p);
    const std::size_t row = static_cast<std::size_t>(p.src - 1) * (config_.words - 1);
    return row + (p.dst - 1) - (p.dst > p.src ? 1 : 0);
  }

  void check_word(WordId w) const {
    if (!config_.contains(w)) {
      throw UnknownWord("word " + std::to_string(w) + " outside 1.." + std::to_string(config_.words));
    }
  }

  void check_pair(const Pair& p) const {
    check_word(p.src);
    check_word(p.dst);
    if (p.src == p.dst) throw SelfPair("pair " + to_string(p) + " names the same word twice");
  }

  // Second AND input of every filter (i, w) went true at `tick`.
  void detect_into(WordId w, Tick tick, TraceLog& trace) {
    for (WordId i = 1; i <= config_.words; ++i) {
      if (i == w) continue;
      TimingFilter& f = filters_[filter_index({i, w})];
      if (f.window_contains(tick)) fire(f, tick, trace);
    }
  }

  void fire(TimingFilter& f, Tick tick, TraceLog& trace) {
    trace.push_back({.t = tick, .ev = RecordKind::FilterFire, .pair = f.pair});
    const auto result = f.reg.shift(tick, config_.delay2);
    if (result == LearnRegister::ShiftResult::Refractory) return;
    trace.push_back({.t = tick, .ev = RecordKind::LatchShift, .pair = f.pair, .stage = f.reg.set_count()});
    if (result == LearnRegister::ShiftResult::Filled) {
      f.learned_tick = tick;
      switches_.close(f.pair);
      trace.push_back({.t = tick, .ev = RecordKind::Learned, .pair = f.pair});
    }
  }

  void emit(TraceLog& trace, Episode& ep, TraceRecord rec) {
    ep.end = std::max(ep.end, rec.t);
    trace.push_back(std::move(rec));
  }

  FabricConfig config_;
  std::vector<WordState> words_;
  std::vector<TimingFilter> filters_;
  SwitchMatrix switches_;
  std::map<EpisodeId, Episode> episodes_;
  EpisodeId next_episode_ = 1;
};

}  // namespace lmf
