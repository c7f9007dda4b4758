#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lmf/driver.hpp"
#include "lmf/fabric.hpp"
#include "lmf/types.hpp"

namespace lmf {

inline constexpr Tick kDefaultMaxTicks = 1'000'000;

struct OverrideDirective {
  Tick tick = 0;
  Pair pair;
  bool open = false;

  friend bool operator==(const OverrideDirective&, const OverrideDirective&) = default;
};

struct Scenario {
  FabricConfig config;
  std::vector<RehearsalPlan> plans;
  std::vector<Probe> probes;
  std::vector<OverrideDirective> overrides;
  Tick max_tick = kDefaultMaxTicks;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::uint64_t parse_uint(std::string_view tok, std::size_t line, std::string_view what) {
  std::uint64_t v = 0;
  const auto* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc{} || p != end || tok.empty()) {
    throw ParseError(line, std::string(what) + " expects a non-negative integer, got '" + std::string(tok) + "'");
  }
  return v;
}

// key=value arguments; every key must be one of `allowed`.
inline std::map<std::string, std::string_view> parse_kv(std::span<const std::string_view> toks,
                                                         std::size_t line, std::string_view directive,
                                                         std::initializer_list<std::string_view> allowed) {
  std::map<std::string, std::string_view> out;
  for (auto tok : toks) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ParseError(line, std::string(directive) + ": expected key=value, got '" + std::string(tok) + "'");
    }
    const std::string key(tok.substr(0, eq));
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) throw ParseError(line, std::string(directive) + ": unknown argument '" + key + "'");
    if (!out.emplace(key, tok.substr(eq + 1)).second) {
      throw ParseError(line, std::string(directive) + ": argument '" + key + "' given twice");
    }
  }
  return out;
}

}  // namespace detail

// Line-oriented directives, `#` starts a comment:
//   fabric words=K delay1=D1 delay2=D2 threshold=N [mode=done_enable|done_done]
//   dur * T | dur <id> T
//   rehearse <id...> [reps=R] [gap=G] [rest=S] [start=T]
//   at T probe <id>
//   at T override <i> <j> open|closed
//   maxticks T
// Warnings (rehearsal gaps that can never satisfy the filter window) are
// appended to `warnings` when given.
inline Scenario parse_scenario(std::string_view text, std::vector<std::string>* warnings = nullptr) {
  using detail::parse_uint;

  Scenario sc;
  std::optional<std::size_t> fabric_line;
  std::optional<std::size_t> maxticks_line;
  std::optional<std::pair<Tick, std::size_t>> default_dur;
  std::map<WordId, std::pair<Tick, std::size_t>> word_dur;
  std::vector<std::size_t> plan_lines, probe_lines, override_lines;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    const auto directive = toks[0];
    const std::span<const std::string_view> args(toks.data() + 1, toks.size() - 1);

    if (directive == "fabric") {
      if (fabric_line) throw ParseError(line_no, "duplicate fabric directive (first on line " + std::to_string(*fabric_line) + ")");
      fabric_line = line_no;
      auto kv = detail::parse_kv(args, line_no, "fabric", {"words", "delay1", "delay2", "threshold", "mode"});
      for (const char* key : {"words", "delay1", "delay2", "threshold"}) {
        if (!kv.contains(key)) throw ParseError(line_no, std::string("fabric: missing ") + key + "=");
      }
      sc.config.words = static_cast<WordId>(parse_uint(kv["words"], line_no, "words"));
      sc.config.delay1 = parse_uint(kv["delay1"], line_no, "delay1");
      sc.config.delay2 = parse_uint(kv["delay2"], line_no, "delay2");
      sc.config.threshold = static_cast<std::uint32_t>(parse_uint(kv["threshold"], line_no, "threshold"));
      if (auto it = kv.find("mode"); it != kv.end()) {
        if (it->second == "done_enable") {
          sc.config.mode = FilterMode::DoneEnable;
        } else if (it->second == "done_done") {
          sc.config.mode = FilterMode::DoneDone;
        } else {
          throw ParseError(line_no, "fabric: mode must be done_enable or done_done");
        }
      }
    } else if (directive == "dur") {
      if (args.size() != 2) throw ParseError(line_no, "dur expects '<id>|* <ticks>'");
      const Tick t = parse_uint(args[1], line_no, "dur");
      if (args[0] == "*") {
        default_dur = {t, line_no};
      } else {
        word_dur[static_cast<WordId>(parse_uint(args[0], line_no, "dur word"))] = {t, line_no};
      }
    } else if (directive == "rehearse") {
      RehearsalPlan plan;
      std::size_t i = 0;
      for (; i < args.size() && args[i].find('=') == std::string_view::npos; ++i) {
        plan.sequence.push_back(static_cast<WordId>(parse_uint(args[i], line_no, "rehearse word")));
      }
      auto kv = detail::parse_kv(args.subspan(i), line_no, "rehearse", {"reps", "gap", "rest", "start"});
      if (auto it = kv.find("reps"); it != kv.end()) plan.reps = static_cast<std::uint32_t>(parse_uint(it->second, line_no, "reps"));
      if (auto it = kv.find("gap"); it != kv.end()) plan.gap = parse_uint(it->second, line_no, "gap");
      if (auto it = kv.find("rest"); it != kv.end()) plan.rest = parse_uint(it->second, line_no, "rest");
      if (auto it = kv.find("start"); it != kv.end()) plan.start = parse_uint(it->second, line_no, "start");
      sc.plans.push_back(std::move(plan));
      plan_lines.push_back(line_no);
    } else if (directive == "at") {
      if (args.size() < 2) throw ParseError(line_no, "at expects 'at <tick> probe|override ...'");
      const Tick t = parse_uint(args[0], line_no, "at");
      if (args[1] == "probe") {
        if (args.size() != 3) throw ParseError(line_no, "probe expects exactly one word id");
        sc.probes.push_back({t, static_cast<WordId>(parse_uint(args[2], line_no, "probe word"))});
        probe_lines.push_back(line_no);
      } else if (args[1] == "override") {
        if (args.size() != 5) throw ParseError(line_no, "override expects '<i> <j> open|closed'");
        OverrideDirective od{t,
                             {static_cast<WordId>(parse_uint(args[2], line_no, "override word")),
                              static_cast<WordId>(parse_uint(args[3], line_no, "override word"))},
                             false};
        if (args[4] == "open") {
          od.open = true;
        } else if (args[4] != "closed") {
          throw ParseError(line_no, "override state must be open or closed, got '" + std::string(args[4]) + "'");
        }
        sc.overrides.push_back(od);
        override_lines.push_back(line_no);
      } else {
        throw ParseError(line_no, "unknown action '" + std::string(args[1]) + "' after at");
      }
    } else if (directive == "maxticks") {
      if (args.size() != 1) throw ParseError(line_no, "maxticks expects one value");
      if (maxticks_line) throw ParseError(line_no, "duplicate maxticks directive");
      maxticks_line = line_no;
      sc.max_tick = parse_uint(args[0], line_no, "maxticks");
      if (sc.max_tick == 0) throw ValidationError(line_no, "maxticks must be positive");
    } else {
      throw ParseError(line_no, "unknown directive '" + std::string(directive) + "'");
    }
  }

  if (!fabric_line) throw ValidationError(0, "missing fabric directive");
  const WordId k = sc.config.words;
  for (const auto& [w, d] : word_dur) {
    if (w < 1 || w > k) {
      throw ValidationError(d.second, "dur names word " + std::to_string(w) + " outside 1.." + std::to_string(k));
    }
  }
  for (WordId w = 1; w <= k; ++w) {
    if (auto it = word_dur.find(w); it != word_dur.end()) {
      sc.config.durations[w] = it->second.first;
    } else if (default_dur) {
      sc.config.durations[w] = default_dur->first;
    }
  }
  try {
    sc.config.validate();
  } catch (const InvalidConfig& e) {
    throw ValidationError(*fabric_line, e.what());
  }

  for (std::size_t i = 0; i < sc.plans.size(); ++i) {
    const auto& plan = sc.plans[i];
    try {
      plan.validate(k);
    } catch (const InvalidPlan& e) {
      throw ValidationError(plan_lines[i], e.what());
    }
    if (!warnings) continue;
    for (std::size_t p = 1; p < plan.sequence.size(); ++p) {
      const Tick reach = sc.config.mode == FilterMode::DoneEnable
                             ? plan.gap
                             : plan.gap + sc.config.duration(plan.sequence[p]);
      if (reach > sc.config.delay1) {
        std::ostringstream os;
        os << "line " << plan_lines[i] << ": warning: pair " << to_string(Pair{plan.sequence[p - 1], plan.sequence[p]})
           << " lands " << reach << " ticks after done, outside the delay1=" << sc.config.delay1
           << " window; it will never be detected";
        warnings->push_back(os.str());
      }
    }
  }
  for (std::size_t i = 0; i < sc.probes.size(); ++i) {
    const WordId w = sc.probes[i].word;
    if (!sc.config.contains(w)) {
      throw ValidationError(probe_lines[i], "probe names word " + std::to_string(w) + " outside 1.." + std::to_string(k));
    }
  }
  for (std::size_t i = 0; i < sc.overrides.size(); ++i) {
    const Pair& p = sc.overrides[i].pair;
    if (!sc.config.contains(p.src) || !sc.config.contains(p.dst)) {
      throw ValidationError(override_lines[i], "override names a word outside 1.." + std::to_string(k));
    }
    if (p.src == p.dst) throw ValidationError(override_lines[i], "override pair must name two different words");
  }
  return sc;
}

// Canonical form: parse_scenario(print_scenario(s)) == s.
inline std::string print_scenario(const Scenario& sc) {
  std::ostringstream os;
  const auto& c = sc.config;
  os << "fabric words=" << c.words << " delay1=" << c.delay1 << " delay2=" << c.delay2
     << " threshold=" << c.threshold << " mode=" << to_string(c.mode) << '\n';

  // Most common duration becomes the default (smallest on ties).
  std::map<Tick, std::size_t> freq;
  for (const auto& [w, d] : c.durations) ++freq[d];
  Tick common = 0;
  std::size_t best = 0;
  for (const auto& [d, n] : freq) {
    if (n > best) {
      best = n;
      common = d;
    }
  }
  if (best > 0) os << "dur * " << common << '\n';
  for (const auto& [w, d] : c.durations) {
    if (d != common) os << "dur " << w << ' ' << d << '\n';
  }

  for (const auto& p : sc.plans) {
    os << "rehearse";
    for (WordId w : p.sequence) os << ' ' << w;
    os << " reps=" << p.reps << " gap=" << p.gap << " rest=" << p.rest << " start=" << p.start << '\n';
  }
  for (const auto& o : sc.overrides) {
    os << "at " << o.tick << " override " << o.pair.src << ' ' << o.pair.dst << (o.open ? " open" : " closed") << '\n';
  }
  for (const auto& p : sc.probes) os << "at " << p.tick << " probe " << p.word << '\n';
  os << "maxticks " << sc.max_tick << '\n';
  return os.str();
}

}  // namespace lmf
