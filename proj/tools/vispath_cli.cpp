// vispath command line: headless runs, live serving and replay.
#include "vispath/engine.hpp"
#include "vispath/scenario_io.hpp"
#include "vispath/server.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <string>
#include <thread>

namespace {

constexpr int kExitReached = 0;
constexpr int kExitError = 1;
constexpr int kExitBudget = 2;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

int default_port() {
  if (const char* env = std::getenv("VISPATH_PORT")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring invalid VISPATH_PORT='" << env << "'\n";
    }
  }
  return vispath::kDefaultPort;
}

int finish(const vispath::Engine& engine, const vispath::WorldState& initial, const std::string& trace_path,
           bool report) {
  if (!trace_path.empty()) vispath::write_trace(engine.trace(), trace_path);
  if (report) {
    if (engine.trace().empty()) {
      std::cout << vispath::Json{{"reached", engine.reached()}, {"ticks", 0}}.dump(2) << '\n';
    } else {
      std::cout << vispath::summary_json(vispath::summarize(engine.trace(), initial.pose)).dump(2) << '\n';
    }
  }
  return engine.reached() ? kExitReached : kExitBudget;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vispath: multi-agent manikin positioning for access and visibility tasks"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string script_path;
  std::string trace_path;
  std::int64_t ticks = 10000;
  bool report = false;

  auto* run = app.add_subcommand("run", "Run a scenario headlessly until reached or the tick budget is spent");
  run->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--ticks", ticks, "Tick budget")->check(CLI::NonNegativeNumber);
  run->add_option("--script", script_path, "Timed command script (JSON lines)")->check(CLI::ExistingFile);
  run->add_option("--trace", trace_path, "Write the per-tick trace here (JSON lines)");
  run->add_flag("--report", report, "Print a JSON summary to stdout");

  int port = default_port();
  std::string bind = "127.0.0.1";
  std::string session_trace = "session_trace.jsonl";
  std::string session_script = "session_script.jsonl";
  double tick_rate = 0.0;
  int divisor = 1;
  bool paused = false;
  auto* serve = app.add_subcommand("serve", "Start a live session");
  serve->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "TCP port (default 8765 or $VISPATH_PORT)");
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--trace", session_trace, "Trace written when the session ends");
  serve->add_option("--script", session_script, "Command script written when the session ends");
  serve->add_option("--tick-rate", tick_rate, "Override the scenario tick rate (Hz)")->check(CLI::PositiveNumber);
  serve->add_option("--broadcast-divisor", divisor, "Send a snapshot every n-th tick")->check(CLI::PositiveNumber);
  serve->add_flag("--paused", paused, "Start paused");

  auto* replay = app.add_subcommand("replay", "Reproduce a recorded live session");
  replay->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  replay->add_option("--script", script_path, "Recorded command script")->required()->check(CLI::ExistingFile);
  replay->add_option("--trace", trace_path, "Output trace")->required();
  replay->add_flag("--report", report, "Print a JSON summary to stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    const vispath::Scenario scenario = vispath::load_scenario(scenario_path);

    if (*run || *replay) {
      const vispath::WorldState initial = vispath::build_world(scenario);
      vispath::Engine engine(initial);
      vispath::Script script;
      if (!script_path.empty()) script = vispath::load_script(script_path);
      if (*run) script.end_tick.reset();
      const std::int64_t budget = *run ? ticks : std::numeric_limits<std::int64_t>::max();
      vispath::run_script(engine, script, budget);
      return finish(engine, initial, trace_path, report);
    }

    vispath::ServerOptions options;
    options.bind_address = bind;
    options.port = port;
    if (tick_rate > 0.0) options.tick_rate_hz = tick_rate;
    options.broadcast_divisor = divisor;
    options.start_running = !paused;
    options.trace_path = session_trace;
    options.script_path = session_script;
    vispath::Server server(scenario, options);
    server.start();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "vispath: serving on " << bind << ":" << server.port() << " (Ctrl-C to stop)\n";
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    if (!session_trace.empty()) std::cerr << "vispath: wrote " << session_trace << '\n';
    if (!session_script.empty()) std::cerr << "vispath: wrote " << session_script << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
