#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmf/events.hpp"
#include "lmf/types.hpp"

namespace lmf {

// Working-memory rehearsal of a fixed word sequence. Each word is enabled
// `gap` ticks after the previous word's done; repetitions are separated by
// `rest` ticks after the last done.
struct RehearsalPlan {
  std::vector<WordId> sequence;
  std::uint32_t reps = 1;
  Tick gap = 0;
  Tick rest = 0;
  Tick start = 0;

  void validate(WordId words) const {
    if (sequence.size() < 2) throw InvalidPlan("rehearsal sequence needs at least 2 words");
    if (reps < 1) throw InvalidPlan("reps must be >= 1");
    std::set<WordId> seen;
    for (WordId w : sequence) {
      if (w < 1 || w > words) {
        throw InvalidPlan("word " + std::to_string(w) + " outside 1.." + std::to_string(words));
      }
      if (!seen.insert(w).second) {
        throw InvalidPlan("word " + std::to_string(w) + " repeats in rehearsal sequence");
      }
    }
  }

  friend bool operator==(const RehearsalPlan&, const RehearsalPlan&) = default;
};

struct Probe {
  Tick tick = 0;
  WordId word = 0;

  friend bool operator==(const Probe&, const Probe&) = default;
};

class Driver {
 public:
  enum class Phase { EnablePending, AwaitingDone, Finished };

  struct PlanState {
    RehearsalPlan plan;
    std::uint32_t rep = 0;
    std::size_t pos = 0;
    Phase phase = Phase::EnablePending;
    std::optional<EpisodeId> episode;

    WordId current_word() const { return plan.sequence[pos]; }
  };

  explicit Driver(WordId words) : words_(words) {}

  std::size_t start_plan(RehearsalPlan plan, SimQueue& queue) {
    plan.validate(words_);
    const std::size_t idx = plans_.size();
    const Tick start = plan.start;
    plans_.push_back(PlanState{std::move(plan)});
    queue.schedule(start, CpuEnable{plans_[idx].current_word(), std::nullopt, idx});
    return idx;
  }

  void probe(const Probe& p, SimQueue& queue) {
    if (p.word < 1 || p.word > words_) {
      throw UnknownWord("probe word " + std::to_string(p.word) + " outside 1.." + std::to_string(words_));
    }
    queue.schedule(p.tick, CpuEnable{p.word, std::nullopt, std::nullopt});
  }

  // The plan's enable went out (accepted or ignored); from now on the plan
  // advances on that word's next done.
  void on_cpu_enable_dispatched(std::size_t plan, EpisodeId episode) {
    PlanState& ps = plans_.at(plan);
    ps.episode = episode;
    ps.phase = Phase::AwaitingDone;
  }

  void on_done(WordId word, Tick tick, SimQueue& queue) {
    for (std::size_t idx = 0; idx < plans_.size(); ++idx) {
      const PlanState& ps = plans_[idx];
      if (ps.phase == Phase::AwaitingDone && ps.current_word() == word) advance(idx, tick, queue);
    }
  }

  // The fabric refused the CPU enable because the word already ran in this
  // repetition. There is no done to wait for, so move on from `tick`.
  void on_cpu_enable_skipped(std::size_t plan, Tick tick, SimQueue& queue) { advance(plan, tick, queue); }

  const std::vector<PlanState>& plans() const noexcept { return plans_; }

 private:
  void advance(std::size_t idx, Tick tick, SimQueue& queue) {
    PlanState& ps = plans_.at(idx);
    if (++ps.pos < ps.plan.sequence.size()) {
      ps.phase = Phase::EnablePending;
      queue.schedule(tick + ps.plan.gap, CpuEnable{ps.current_word(), ps.episode, idx});
    } else if (++ps.rep < ps.plan.reps) {
      ps.pos = 0;
      ps.episode.reset();
      ps.phase = Phase::EnablePending;
      queue.schedule(tick + ps.plan.rest, CpuEnable{ps.current_word(), std::nullopt, idx});
    } else {
      ps.phase = Phase::Finished;
    }
  }

  WordId words_;
  std::vector<PlanState> plans_;
};

}  // namespace lmf
