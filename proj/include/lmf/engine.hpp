#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lmf/types.hpp"

namespace lmf {

// A scheduled event. (tick, seq) is a total order; seq is the global
// insertion number and breaks same-tick ties.
template <typename Payload>
struct Event {
  Tick tick = 0;
  std::uint64_t seq = 0;
  Payload payload;
};

// Min-ordered pending set plus the simulation clock.
template <typename Payload>
class EventQueue {
 public:
  using event_type = Event<Payload>;

  // Returns the assigned sequence number.
  std::uint64_t schedule(Tick tick, Payload payload) {
    if (tick < clock_) {
      throw SchedulingInPast("event scheduled at tick " + std::to_string(tick) +
                             " while clock is " + std::to_string(clock_));
    }
    const std::uint64_t seq = next_seq_++;
    heap_.push_back(event_type{tick, seq, std::move(payload)});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
    return seq;
  }

  // Removes the least (tick, seq) event and advances the clock to its tick.
  std::optional<event_type> step() {
    if (heap_.empty()) return std::nullopt;
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    event_type ev = std::move(heap_.back());
    heap_.pop_back();
    clock_ = ev.tick;
    ++dispatched_;
    return ev;
  }

  const event_type* peek() const { return heap_.empty() ? nullptr : &heap_.front(); }

  // Pending events in unspecified order.
  std::span<const event_type> pending_events() const noexcept { return heap_; }

  Tick now() const noexcept { return clock_; }
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t pending() const noexcept { return heap_.size(); }
  std::uint64_t scheduled_count() const noexcept { return next_seq_; }
  std::uint64_t dispatched_count() const noexcept { return dispatched_; }

 private:
  struct Later {
    bool operator()(const event_type& a, const event_type& b) const {
      return std::pair(a.tick, a.seq) > std::pair(b.tick, b.seq);
    }
  };

  std::vector<event_type> heap_;
  Tick clock_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dispatched_ = 0;
};

struct RunOutcome {
  enum class Kind { Quiescent, TickLimitReached };

  Kind kind = Kind::Quiescent;
  // Clock at termination. For a tick-limited run this is the tick of the
  // last dispatched event (<= max_tick).
  Tick final_tick = 0;

  bool quiescent() const noexcept { return kind == Kind::Quiescent; }

  friend bool operator==(const RunOutcome&, const RunOutcome&) = default;
};

// Dispatches events through `handler` until the queue drains or the next
// event lies beyond max_tick. The handler may schedule further events.
template <typename Payload, typename Handler>
RunOutcome run_to_quiescence(EventQueue<Payload>& queue, Tick max_tick, Handler&& handler) {
  if (max_tick == 0) throw std::invalid_argument("max_tick must be positive");
  while (const auto* next = queue.peek()) {
    if (next->tick > max_tick) {
      return {RunOutcome::Kind::TickLimitReached, queue.now()};
    }
    auto ev = queue.step();
    handler(*ev);
  }
  return {RunOutcome::Kind::Quiescent, queue.now()};
}

}  // namespace lmf
