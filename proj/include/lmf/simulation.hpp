#pragma once

#include <optional>
#include <type_traits>
#include <variant>

#include "lmf/driver.hpp"
#include "lmf/engine.hpp"
#include "lmf/events.hpp"
#include "lmf/fabric.hpp"
#include "lmf/scenario.hpp"
#include "lmf/trace.hpp"

namespace lmf {

// Engine + fabric + driver + trace as one self-contained value.
class Simulation {
 public:
  explicit Simulation(FabricConfig config) : fabric_(std::move(config)), driver_(fabric_.config().words) {}

  // Same-tick setup events dispatch in this order: overrides, plans, probes.
  explicit Simulation(const Scenario& sc) : Simulation(sc.config) {
    for (const auto& o : sc.overrides) schedule_override(o.tick, o.pair, o.open);
    for (const auto& p : sc.plans) start_plan(p);
    for (const auto& p : sc.probes) probe(p);
  }

  std::size_t start_plan(RehearsalPlan plan) { return driver_.start_plan(std::move(plan), queue_); }
  void probe(const Probe& p) { driver_.probe(p, queue_); }
  void schedule_override(Tick tick, const Pair& p, bool open) {
    if (!fabric_.config().contains(p.src) || !fabric_.config().contains(p.dst)) {
      throw UnknownWord("override " + to_string(p) + " names an unknown word");
    }
    if (p.src == p.dst) throw SelfPair("override " + to_string(p) + " names the same word twice");
    queue_.schedule(tick, OverrideSet{p, open});
  }

  std::optional<SimEvent> step() {
    auto ev = queue_.step();
    if (ev) dispatch(*ev);
    return ev;
  }

  RunOutcome run(Tick max_tick) {
    return run_to_quiescence(queue_, max_tick, [this](const SimEvent& ev) { dispatch(ev); });
  }

  Tick now() const noexcept { return queue_.now(); }
  const SimQueue& queue() const noexcept { return queue_; }
  const Fabric& fabric() const noexcept { return fabric_; }
  Fabric& fabric() noexcept { return fabric_; }
  const Driver& driver() const noexcept { return driver_; }
  const TraceLog& trace() const noexcept { return trace_; }

 private:
  void dispatch(const SimEvent& ev) {
    const Tick t = ev.tick;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, CpuEnable>) {
            const EpisodeId ep = p.episode ? *p.episode : fabric_.open_episode(p.word, t);
            const auto result = fabric_.on_enable(p.word, t, Source::Cpu, std::nullopt, ep, queue_, trace_);
            if (p.plan) {
              driver_.on_cpu_enable_dispatched(*p.plan, ep);
              if (result == EnableResult::IgnoredRepeat) driver_.on_cpu_enable_skipped(*p.plan, t, queue_);
            }
          } else if constexpr (std::is_same_v<T, AutoEnable>) {
            fabric_.on_enable(p.word, t, Source::Auto, p.source, p.episode, queue_, trace_);
          } else if constexpr (std::is_same_v<T, WordDone>) {
            fabric_.on_done(p.word, t, queue_, trace_);
            driver_.on_done(p.word, t, queue_);
          } else {
            fabric_.apply_override(p.pair, p.open, t, trace_);
          }
        },
        ev.payload);
  }

  Fabric fabric_;
  Driver driver_;
  SimQueue queue_;
  TraceLog trace_;
};

}  // namespace lmf
