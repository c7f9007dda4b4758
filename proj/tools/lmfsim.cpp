// lmfsim: run learning-memory-fabric scenarios, emit traces and reports, and
// cross-check traces against the brute-force oracle.
//
// Exit codes: 0 ok, 1 parse/validation error, 2 I/O error, 3 tick limit
// reached, 4 verification divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lmf/lmf.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitIo = 2;
constexpr int kExitTickLimit = 3;
constexpr int kExitDiverged = 4;

struct IoError {
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError{"cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError{"failed reading '" + path + "'"};
  return ss.str();
}

std::string sibling(const std::string& scenario, const char* suffix) {
  std::filesystem::path p(scenario);
  p.replace_extension(suffix);
  return p.string();
}

// Parses the scenario, printing warnings and errors as `path:line: message`.
lmf::Scenario load_scenario(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::string> warnings;
  auto sc = lmf::parse_scenario(text, &warnings);
  for (const auto& w : warnings) std::cerr << path << ": " << w << '\n';
  return sc;
}

int cmd_run(const std::string& scenario_path, std::string trace_path, std::string report_path,
            std::optional<lmf::Tick> max_ticks, bool no_loop_suppression) {
  auto sc = load_scenario(scenario_path);
  if (max_ticks) sc.max_tick = *max_ticks;
  if (no_loop_suppression) sc.config.loop_suppression = false;
  if (trace_path.empty()) trace_path = sibling(scenario_path, ".trace.jsonl");
  if (report_path.empty()) report_path = sibling(scenario_path, ".report.json");

  lmf::Simulation sim(sc);
  const auto outcome = sim.run(sc.max_tick);

  std::ofstream trace_out(trace_path, std::ios::binary | std::ios::trunc);
  if (!trace_out) throw IoError{"cannot write '" + trace_path + "'"};
  try {
    lmf::write_trace(trace_out, sim.trace());
    trace_out.close();
    if (!trace_out) throw lmf::Error("close failed");
  } catch (const lmf::Error&) {
    throw IoError{"failed writing '" + trace_path + "'"};
  }

  std::ofstream report_out(report_path, std::ios::binary | std::ios::trunc);
  if (!report_out) throw IoError{"cannot write '" + report_path + "'"};
  try {
    lmf::write_report(report_out, lmf::build_report(sim.fabric(), outcome));
    report_out.close();
    if (!report_out) throw lmf::Error("close failed");
  } catch (const lmf::Error&) {
    throw IoError{"failed writing '" + report_path + "'"};
  }

  if (!outcome.quiescent()) {
    std::cerr << scenario_path << ": tick limit " << sc.max_tick << " reached with events still pending\n";
    return kExitTickLimit;
  }
  return kExitOk;
}

int cmd_verify(const std::string& scenario_path, std::string trace_path, const std::string& report_path) {
  const auto sc = load_scenario(scenario_path);
  if (trace_path.empty()) trace_path = sibling(scenario_path, ".trace.jsonl");

  std::vector<lmf::TraceRecord> trace;
  std::vector<lmf::oracle::Divergence> divergences;
  {
    std::istringstream in(read_file(trace_path));
    try {
      trace = lmf::read_trace(in);
      divergences = lmf::oracle::verify_trace(trace, sc.config);
    } catch (const lmf::MalformedTrace& e) {
      std::cerr << trace_path << ": " << e.what() << '\n';
      return kExitDiverged;
    }
  }
  if (!report_path.empty()) {
    nlohmann::json report;
    try {
      report = nlohmann::json::parse(read_file(report_path));
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << report_path << ": " << e.what() << '\n';
      return kExitDiverged;
    }
    auto more = lmf::oracle::verify_report(report, trace, sc.config);
    divergences.insert(divergences.end(), more.begin(), more.end());
  }
  if (divergences.empty()) return kExitOk;

  std::cerr << trace_path << ": first divergence: " << lmf::oracle::to_string(divergences.front()) << '\n';
  if (divergences.size() > 1) std::cerr << "(" << divergences.size() - 1 << " further divergences)\n";
  return kExitDiverged;
}

int cmd_check(const std::string& scenario_path) {
  const auto sc = load_scenario(scenario_path);
  std::cout << lmf::print_scenario(sc);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning memory fabric simulator"};
  app.require_subcommand(1);

  std::string scenario, trace, report;
  std::optional<lmf::Tick> max_ticks;
  bool no_loop_suppression = false;

  auto* run = app.add_subcommand("run", "simulate a scenario and write its trace and report");
  run->add_option("scenario", scenario, "scenario file")->required();
  run->add_option("--trace", trace, "trace output (default <scenario>.trace.jsonl)");
  run->add_option("--report", report, "report output (default <scenario>.report.json)");
  run->add_option("--max-ticks", max_ticks, "override the scenario's maxticks");
  run->add_flag("--no-loop-suppression", no_loop_suppression)->group("");

  auto* verify = app.add_subcommand("verify", "cross-check a trace against the oracle");
  verify->add_option("scenario", scenario, "scenario file")->required();
  verify->add_option("--trace", trace, "trace to check (default <scenario>.trace.jsonl)");
  verify->add_option("--report", report, "also check this report against the trace");

  auto* check = app.add_subcommand("check", "validate a scenario and print its canonical form");
  check->add_option("scenario", scenario, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*run) return cmd_run(scenario, trace, report, max_ticks, no_loop_suppression);
    if (*verify) return cmd_verify(scenario, trace, report);
    return cmd_check(scenario);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.message << '\n';
    return kExitIo;
  } catch (const lmf::LineError& e) {
    std::cerr << scenario << ": " << e.what() << '\n';
    return kExitParse;
  } catch (const lmf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  }
}
