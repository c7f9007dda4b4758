// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Expected values are worked out by hand from the scenario texts.

#include <algorithm>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lmf/lmf.hpp"
#include "random_scenario.hpp"

namespace {

using namespace lmf;
using oracle::PredictedTimeline;
using oracle::TimelineEntry;
using TK = oracle::TimelineKind;

struct Failure {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

struct Run {
  Scenario scenario;
  RunOutcome outcome;
  TraceLog trace;
  std::set<Pair> learned;
  Report report;
};

// Every scenario run by criteria 1-7, rechecked by criterion 8.
std::vector<Scenario> g_corpus;

Run run(const Scenario& sc) {
  g_corpus.push_back(sc);
  Simulation sim(sc);
  Run r{sc, sim.run(sc.max_tick), sim.trace(), sim.fabric().learned_set(), {}};
  r.report = build_report(sim.fabric(), r.outcome);
  return r;
}

Run run(const std::string& text) { return run(parse_scenario(text)); }

const Report::EpisodeSummary& episode_starting_at(const Run& r, Tick t, WordId trigger) {
  for (const auto& e : r.report.episodes) {
    if (e.start == t && e.trigger == trigger) return e;
  }
  throw Failure{"no episode triggered by word " + std::to_string(trigger) + " at tick " + std::to_string(t)};
}

std::vector<TraceRecord> records_of(const Run& r, EpisodeId ep) {
  std::vector<TraceRecord> out;
  for (const auto& rec : r.trace) {
    if (rec.episode == ep) out.push_back(rec);
  }
  return out;
}

std::string describe(const PredictedTimeline& tl) {
  std::string s;
  for (const auto& e : tl) s += "\n    " + oracle::to_string(e);
  return s;
}

void require_timeline(const PredictedTimeline& got, const PredictedTimeline& want, const std::string& what) {
  require(got == want, what + ": got" + describe(got) + "\n  expected" + describe(want));
}

std::string worked_example(std::uint32_t reps) {
  return "fabric words=3 delay1=5 delay2=1 threshold=10\n"
         "dur * 4\n"
         "rehearse 1 3 2 reps=" + std::to_string(reps) + " gap=2 rest=20\n"
         "at 500 probe 1\n"
         "maxticks 2000\n";
}

const PredictedTimeline kFullReplay{{500, TK::Enable, 1, std::nullopt}, {504, TK::Done, 1, std::nullopt},
                                    {509, TK::Enable, 3, Pair{1, 3}},    {513, TK::Done, 3, std::nullopt},
                                    {518, TK::Enable, 2, Pair{3, 2}},    {522, TK::Done, 2, std::nullopt}};

std::string criterion_1() {
  const auto r = run(worked_example(10));
  require(r.outcome.quiescent(), "run did not quiesce");
  require(r.learned == std::set<Pair>{{1, 3}, {3, 2}}, "learned set is not {(1,3),(3,2)}");
  const auto& ep = episode_starting_at(r, 500, 1);
  require(ep.words == std::vector<WordId>{1, 3, 2}, "probe episode does not enable 1, 3, 2");
  require(ep.cpu_enables_after_trigger == 0, "probe episode used further CPU enables");
  require_timeline(oracle::episode_timeline(r.trace, ep.id), kFullReplay, "probe replay");
  for (const auto& rec : records_of(r, ep.id)) {
    if (rec.ev == RecordKind::Enable) require(rec.src == (rec.word == 1u ? Source::Cpu : Source::Auto), "wrong source");
  }
  return "learned {(1,3),(3,2)}; replay 1@500 3@509 2@518, 0 extra CPU enables";
}

std::string criterion_2() {
  const auto nine = run(worked_example(9));
  require(nine.learned.empty(), "reps=9 learned something");
  const auto& ep9 = episode_starting_at(nine, 500, 1);
  const auto recs = records_of(nine, ep9.id);
  require(recs.size() == 2 && recs[0].ev == RecordKind::Enable && recs[0].t == 500 && recs[1].ev == RecordKind::Done &&
              recs[1].t == 504,
          "reps=9 probe is not exactly one enable and one done");

  const auto ten = run(worked_example(10));
  require(ten.learned.size() == 2, "reps=10 did not learn both pairs");
  require_timeline(oracle::episode_timeline(ten.trace, episode_starting_at(ten, 500, 1).id), kFullReplay,
                   "reps=10 probe");
  return "reps=9: 0 pairs, 1 enable + 1 done; reps=10: full replay";
}

std::string criterion_3() {
  std::string detail;
  for (WordId k : {2u, 3u, 5u, 10u}) {
    FabricConfig c;
    c.words = k;
    c.delay1 = 5;
    c.delay2 = 1;
    c.threshold = 2;
    for (WordId w = 1; w <= k; ++w) c.durations[w] = 1;
    const Fabric f(c);
    std::set<Pair> pairs;
    for (const auto& filter : f.filters()) {
      require(filter.pair.src != filter.pair.dst, "self pair filter");
      pairs.insert(filter.pair);
    }
    require(f.filters().size() == k * (k - 1) && pairs.size() == k * (k - 1),
            "K=" + std::to_string(k) + " has " + std::to_string(f.filters().size()) + " filters");
    detail += (detail.empty() ? "" : ", ") + ("K=" + std::to_string(k) + ":" + std::to_string(f.filters().size()));
  }
  return detail;
}

std::string criterion_4() {
  const auto r = run(
      "fabric words=3 delay1=5 delay2=1 threshold=10\n"
      "dur * 4\n"
      "rehearse 1 3 2 reps=10 gap=2 rest=20\n"
      "at 490 override 1 3 open\n"
      "at 500 probe 1\n"
      "at 600 override 1 3 closed\n"
      "at 700 probe 1\n"
      "maxticks 2000\n");
  require(r.outcome.quiescent(), "run did not quiesce");
  const auto blocked = records_of(r, episode_starting_at(r, 500, 1).id);
  require(blocked.size() == 3, "blocked episode has " + std::to_string(blocked.size()) + " records");
  require(blocked[0].ev == RecordKind::Enable && blocked[0].word == 1u && blocked[0].t == 500, "first record");
  require(blocked[1].ev == RecordKind::Done && blocked[1].word == 1u && blocked[1].t == 504, "second record");
  require(blocked[2].ev == RecordKind::OverrideBlocked && blocked[2].pair == Pair{1, 3} && blocked[2].t == 504,
          "third record");

  PredictedTimeline again;
  for (auto e : kFullReplay) {
    e.tick += 200;
    again.push_back(e);
  }
  require_timeline(oracle::episode_timeline(r.trace, episode_starting_at(r, 700, 1).id), again, "replay after close");
  return "open: enable(1) done(1) override_blocked(1,3); closed: full replay at 700";
}

std::string criterion_5() {
  const std::string base =
      "fabric words=4 delay1=5 delay2=1 threshold=5\n"
      "dur 1 3\ndur 2 4\ndur 3 2\ndur 4 5\n"
      "rehearse 1 2 reps=5 gap=1 rest=20\n"
      "rehearse 3 4 reps=5 gap=1 rest=20 start=300\n"
      "maxticks 3000\n";
  const auto both = run(base + "at 1000 probe 1\nat 1000 probe 3\n");
  const auto solo1 = run(base + "at 1000 probe 1\n");
  const auto solo3 = run(base + "at 1000 probe 3\n");
  require(both.outcome.quiescent(), "concurrent run did not quiesce");
  require(both.learned == std::set<Pair>{{1, 2}, {3, 4}}, "learned set is not {(1,2),(3,4)}");

  const auto& cfg = both.scenario.config;
  const auto p1 = oracle::predict_timeline(both.learned, {}, 1, cfg, 1000);
  const auto p3 = oracle::predict_timeline(both.learned, {}, 3, cfg, 1000);
  PredictedTimeline merged = p1;
  merged.insert(merged.end(), p3.begin(), p3.end());
  oracle::canonicalize(merged);

  // Everything the fabric did from the probe tick on, as one timeline.
  PredictedTimeline observed;
  for (const auto& rec : both.trace) {
    if (rec.t < 1000) continue;
    switch (rec.ev) {
      case RecordKind::Enable:
        observed.push_back({rec.t, TK::Enable, *rec.word, rec.pair});
        break;
      case RecordKind::Done:
        observed.push_back({rec.t, TK::Done, *rec.word, std::nullopt});
        break;
      case RecordKind::IgnoredEnable:
      case RecordKind::OverrideBlocked:
      case RecordKind::LoopSuppressed:
        throw Failure{"unexpected " + std::string(to_string(rec.ev)) + " record"};
      default:
        break;
    }
  }
  oracle::canonicalize(observed);
  require_timeline(observed, merged, "interleaved trace vs merged oracle timelines");

  const auto e1 = oracle::episode_timeline(both.trace, episode_starting_at(both, 1000, 1).id);
  const auto e3 = oracle::episode_timeline(both.trace, episode_starting_at(both, 1000, 3).id);
  require_timeline(e1, oracle::episode_timeline(solo1.trace, episode_starting_at(solo1, 1000, 1).id), "chain 1 vs solo");
  require_timeline(e3, oracle::episode_timeline(solo3.trace, episode_starting_at(solo3, 1000, 3).id), "chain 3 vs solo");
  require(e1 == p1 && e3 == p3, "episode timelines differ from oracle");
  return "1->2 and 3->4 replayed together; " + std::to_string(observed.size()) +
         " timeline entries match the merged oracle and the solo runs";
}

std::string criterion_6() {
  const auto r = run(
      "fabric words=2 delay1=5 delay2=1 threshold=3\n"
      "dur * 4\n"
      "rehearse 1 2 reps=3 gap=2 rest=20\n"
      "rehearse 2 1 reps=3 gap=2 rest=20 start=200\n"
      "at 1000 probe 1\n"
      "maxticks 5000\n");
  require(r.learned == std::set<Pair>{{1, 2}, {2, 1}}, "both directions not learned");
  require(r.outcome.quiescent(), "run hit the tick limit");
  require(r.outcome.final_tick == 1013, "final tick " + std::to_string(r.outcome.final_tick));
  const PredictedTimeline want{{1000, TK::Enable, 1, std::nullopt},
                               {1004, TK::Done, 1, std::nullopt},
                               {1009, TK::Enable, 2, Pair{1, 2}},
                               {1013, TK::Done, 2, std::nullopt},
                               {1013, TK::LoopSuppressed, 1, Pair{2, 1}}};
  require_timeline(oracle::episode_timeline(r.trace, episode_starting_at(r, 1000, 1).id), want, "probe episode");
  return "enable 1, enable 2, loop_suppressed (2,1); quiescent at 1013";
}

std::string criterion_7() {
  constexpr int kScenarios = 1000;
  std::mt19937_64 rng(20240607);
  std::size_t probe_episodes = 0;
  std::size_t learned_pairs = 0;
  for (int i = 0; i < kScenarios; ++i) {
    const auto g = testing::random_scenario(rng);
    const auto r = run(g.scenario);
    const auto& cfg = g.scenario.config;
    const std::string where = "scenario " + std::to_string(i) + ":\n" + print_scenario(g.scenario);
    require(r.outcome.quiescent(), "tick limit in " + where);

    const auto predicted = oracle::predict_learned(oracle::count_detections(r.trace, cfg), cfg.threshold);
    require(r.learned == predicted, "learned set differs from oracle in " + where);
    learned_pairs += r.learned.size();

    const auto spans = oracle::episode_spans(r.trace);
    for (const auto& [id, span] : spans) {
      const auto& first = r.trace[span.first];
      if (first.t < g.settle) continue;
      require(first.ev == RecordKind::Enable && first.src == Source::Cpu, "probe not enabled in " + where);
      const auto want = oracle::predict_timeline(oracle::learned_before(r.trace, span.first),
                                                 oracle::overrides_before(r.trace, span.first), *first.word, cfg,
                                                 first.t);
      require_timeline(oracle::episode_timeline(r.trace, id), want, "probe episode " + std::to_string(id) + " in " + where);
      ++probe_episodes;
    }
    const auto div = oracle::verify_trace(r.trace, cfg);
    require(div.empty(), (div.empty() ? std::string() : oracle::to_string(div.front())) + " in " + where);
  }
  require(probe_episodes >= kScenarios, "too few probe episodes compared");
  return std::to_string(kScenarios) + " scenarios, " + std::to_string(probe_episodes) + " probe episodes, " +
         std::to_string(learned_pairs) + " learned pairs, 0 divergences";
}

// Stages and learned flags read back from latch_shift / learned records.
void require_monotone(const TraceLog& trace, std::uint32_t threshold) {
  std::map<Pair, std::uint32_t> stage;
  std::set<Pair> learned;
  for (const auto& rec : trace) {
    if (rec.ev == RecordKind::LatchShift) {
      const auto prev = stage[*rec.pair];
      require(*rec.stage >= prev && *rec.stage <= threshold, "latch stage of " + to_string(*rec.pair) + " regressed");
      require(!learned.contains(*rec.pair) || *rec.stage == threshold, "learned register below threshold");
      stage[*rec.pair] = *rec.stage;
    } else if (rec.ev == RecordKind::Learned) {
      require(stage[*rec.pair] == threshold, "learned before register filled");
      require(learned.insert(*rec.pair).second, to_string(*rec.pair) + " learned twice");
    }
  }
}

std::string trace_bytes(const TraceLog& trace) {
  std::ostringstream out;
  write_trace(out, trace);
  return out.str();
}

std::string criterion_8() {
  const std::vector<Scenario> corpus = g_corpus;
  require(!corpus.empty(), "no scenarios collected");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& sc = corpus[i];
    Simulation a(sc);
    Simulation b(sc);
    a.run(sc.max_tick);
    b.run(sc.max_tick);
    require_monotone(a.trace(), sc.config.threshold);
    require(trace_bytes(a.trace()) == trace_bytes(b.trace()), "rerun differs for:\n" + print_scenario(sc));
  }
  return std::to_string(corpus.size()) + " scenarios monotone and byte-identical on rerun";
}

std::string criterion_9() {
  const auto r = run(
      "fabric words=3 delay1=5 delay2=1 threshold=3\n"
      "dur * 4\n"
      "rehearse 1 2 3 reps=50 gap=6 rest=20\n"
      "at 5000 probe 1\n"
      "maxticks 10000\n");
  require(r.scenario.plans[0].gap > r.scenario.config.delay1, "gap does not exceed delay1");
  require(r.learned.empty(), "learned " + std::to_string(r.learned.size()) + " pairs");
  for (const auto& d : r.report.detections) require(d.count == 0, "detection on " + to_string(d.pair));
  return "gap 6 > delay1 5, 50 reps: 0 detections, 0 learned";
}

std::string criterion_10() {
  // Done of 1 at 1 opens [1,6]; dones of 2 at 2 and 4 are 2 < delay2=3 apart.
  const auto r = run(
      "fabric words=2 delay1=5 delay2=3 threshold=2 mode=done_done\n"
      "dur * 1\n"
      "at 0 probe 1\n"
      "at 1 probe 2\n"
      "at 3 probe 2\n"
      "maxticks 100\n");
  const auto& cfg = r.scenario.config;
  std::vector<Tick> dones;
  for (const auto& rec : r.trace) {
    if (rec.ev == RecordKind::Done && rec.word == 2u) dones.push_back(rec.t);
  }
  require(dones == std::vector<Tick>{2, 4}, "dones of word 2 are not at 2 and 4");
  const auto oracle_count = oracle::count_detections(r.trace, cfg).count({1, 2});
  std::uint64_t fabric_count = 0;
  for (const auto& d : r.report.detections) {
    if (d.pair == Pair{1, 2}) fabric_count = d.count;
  }
  require(oracle_count == 1, "oracle counts " + std::to_string(oracle_count));
  require(fabric_count == 1, "fabric counts " + std::to_string(fabric_count));
  require(r.learned.empty(), "pair learned from a refractory detection");

  // Control: with a shorter refractory period both coincidences count.
  auto relaxed = r.scenario;
  relaxed.config.delay2 = 2;
  const auto c = run(relaxed);
  require(oracle::count_detections(c.trace, relaxed.config).count({1, 2}) == 2 && c.learned.size() == 1,
          "control with delay2=2 does not count two detections");
  return "coincidences at 2 and 4 with delay2=3: oracle 1, fabric 1 (delay2=2 control: 2)";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
      {"worked example 1-3-2", criterion_1},
      {"threshold sharpness", criterion_2},
      {"structural scaling K(K-1)", criterion_3},
      {"override", criterion_4},
      {"concurrency", criterion_5},
      {"no repeat / no loop", criterion_6},
      {"oracle equivalence (randomized)", criterion_7},
      {"monotonicity and determinism", criterion_8},
      {"negative timing control", criterion_9},
      {"refractory", criterion_10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, check] = criteria[i];
    std::string status;
    std::string detail;
    try {
      detail = check();
      status = "PASS";
    } catch (const Failure& f) {
      status = "FAIL";
      detail = f.what;
    } catch (const std::exception& e) {
      status = "FAIL";
      detail = std::string("exception: ") + e.what();
    }
    if (status == "FAIL") ++failed;
    std::cout << "criterion " << i + 1 << " [PRIMARY] " << name << ": " << status << " - " << detail << '\n';
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
