#pragma once

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lmf/types.hpp"

namespace lmf {

enum class RecordKind {
  Enable,
  Done,
  IgnoredEnable,
  FilterFire,
  LatchShift,
  Learned,
  AutoEnableScheduled,
  LoopSuppressed,
  OverrideBlocked,
  OverrideSet,
};

enum class Source { Cpu, Auto };

inline constexpr std::array<std::pair<RecordKind, std::string_view>, 10> kRecordKindNames{{
    {RecordKind::Enable, "enable"},
    {RecordKind::Done, "done"},
    {RecordKind::IgnoredEnable, "ignored_enable"},
    {RecordKind::FilterFire, "filter_fire"},
    {RecordKind::LatchShift, "latch_shift"},
    {RecordKind::Learned, "learned"},
    {RecordKind::AutoEnableScheduled, "auto_enable_scheduled"},
    {RecordKind::LoopSuppressed, "loop_suppressed"},
    {RecordKind::OverrideBlocked, "override_blocked"},
    {RecordKind::OverrideSet, "override_set"},
}};

inline std::string_view to_string(RecordKind k) {
  for (const auto& [kind, name] : kRecordKindNames) {
    if (kind == k) return name;
  }
  return "?";
}

inline std::optional<RecordKind> parse_record_kind(std::string_view s) {
  for (const auto& [kind, name] : kRecordKindNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

inline std::string_view to_string(Source s) { return s == Source::Cpu ? "cpu" : "auto"; }

// One line of the trace. Which optional fields are present depends on `ev`:
//   enable, ignored_enable   word, pair (auto only), src, episode
//   done                     word, episode
//   filter_fire, learned     pair
//   latch_shift              pair, stage
//   auto_enable_scheduled,
//   loop_suppressed,
//   override_blocked         word (the successor), pair, episode
//   override_set             pair, open
struct TraceRecord {
  Tick t = 0;
  RecordKind ev = RecordKind::Enable;
  std::optional<WordId> word;
  std::optional<Pair> pair;
  std::optional<Source> src;
  std::optional<EpisodeId> episode;
  std::optional<std::uint32_t> stage;
  std::optional<bool> open;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// Fixed key order: t, ev, word, pair, src, episode, stage, open.
inline std::string to_json_line(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["t"] = r.t;
  j["ev"] = to_string(r.ev);
  if (r.word) j["word"] = *r.word;
  if (r.pair) j["pair"] = {r.pair->src, r.pair->dst};
  if (r.src) j["src"] = to_string(*r.src);
  if (r.episode) j["episode"] = *r.episode;
  if (r.stage) j["stage"] = *r.stage;
  if (r.open) j["open"] = *r.open;
  return j.dump();
}

inline void write_trace(std::ostream& out, std::span<const TraceRecord> records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw Error("failed writing trace");
}

inline TraceRecord parse_trace_line(std::string_view line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedTrace(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedTrace(line_no, "record is not an object");

  auto uint_field = [&](const char* key) -> std::optional<std::uint64_t> {
    auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    if (!it->is_number_unsigned()) {
      throw MalformedTrace(line_no, std::string("field '") + key + "' must be a non-negative integer");
    }
    return it->get<std::uint64_t>();
  };

  TraceRecord r;
  const auto t = uint_field("t");
  if (!t) throw MalformedTrace(line_no, "missing field 't'");
  r.t = *t;

  auto ev = j.find("ev");
  if (ev == j.end() || !ev->is_string()) throw MalformedTrace(line_no, "missing field 'ev'");
  const auto kind = parse_record_kind(ev->get<std::string>());
  if (!kind) throw MalformedTrace(line_no, "unknown ev kind '" + ev->get<std::string>() + "'");
  r.ev = *kind;

  if (auto w = uint_field("word")) r.word = static_cast<WordId>(*w);
  if (auto it = j.find("pair"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_unsigned() ||
        !(*it)[1].is_number_unsigned()) {
      throw MalformedTrace(line_no, "field 'pair' must be [i,j]");
    }
    r.pair = Pair{(*it)[0].get<WordId>(), (*it)[1].get<WordId>()};
  }
  if (auto it = j.find("src"); it != j.end()) {
    if (*it == "cpu") {
      r.src = Source::Cpu;
    } else if (*it == "auto") {
      r.src = Source::Auto;
    } else {
      throw MalformedTrace(line_no, "field 'src' must be cpu or auto");
    }
  }
  if (auto e = uint_field("episode")) r.episode = *e;
  if (auto s = uint_field("stage")) r.stage = static_cast<std::uint32_t>(*s);
  if (auto it = j.find("open"); it != j.end()) {
    if (!it->is_boolean()) throw MalformedTrace(line_no, "field 'open' must be boolean");
    r.open = it->get<bool>();
  }

  auto need = [&](bool present, const char* key) {
    if (!present) {
      throw MalformedTrace(line_no, std::string(to_string(r.ev)) + " record missing '" + key + "'");
    }
  };
  switch (r.ev) {
    case RecordKind::Enable:
    case RecordKind::IgnoredEnable:
      need(r.word.has_value(), "word");
      need(r.src.has_value(), "src");
      need(r.episode.has_value(), "episode");
      if (r.src == Source::Auto) need(r.pair.has_value(), "pair");
      break;
    case RecordKind::Done:
      need(r.word.has_value(), "word");
      need(r.episode.has_value(), "episode");
      break;
    case RecordKind::FilterFire:
    case RecordKind::Learned:
      need(r.pair.has_value(), "pair");
      break;
    case RecordKind::LatchShift:
      need(r.pair.has_value(), "pair");
      need(r.stage.has_value(), "stage");
      break;
    case RecordKind::AutoEnableScheduled:
    case RecordKind::LoopSuppressed:
    case RecordKind::OverrideBlocked:
      need(r.word.has_value(), "word");
      need(r.pair.has_value(), "pair");
      need(r.episode.has_value(), "episode");
      break;
    case RecordKind::OverrideSet:
      need(r.pair.has_value(), "pair");
      need(r.open.has_value(), "open");
      break;
  }
  return r;
}

// Blank lines are skipped; anything else must be a valid record.
inline std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_trace_line(line, line_no));
  }
  return out;
}

}  // namespace lmf
