#include "line_client.hpp"
#include "vispath/engine.hpp"
#include "vispath/scenario_io.hpp"
#include "vispath/server.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

namespace vispath {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

const fs::path kScenarios = VISPATH_SCENARIO_DIR;

using test_support::LineClient;

ServerOptions paused_options() {
  ServerOptions o;
  o.port = 0;
  o.start_running = false;
  return o;
}

Scenario window_scenario() { return load_scenario(kScenarios / "window_inspection.json"); }

TEST(Server, HandshakeCarriesSceneAndSnapshot) {
  Server server(window_scenario(), paused_options());
  server.start();
  LineClient c(server.port());
  const Json hello = c.until("hello");
  EXPECT_EQ(hello.at("protocol"), kProtocolVersion);
  EXPECT_EQ(hello.at("server"), "vispath");
  const Json scene = c.until("scene");
  EXPECT_EQ(scene.at("obstacles").size(), 1u);
  EXPECT_EQ(scene.at("obstacles")[0].at("triangles").size(), 32u);
  const Json snap = c.until("snapshot");
  EXPECT_EQ(snap.at("tick"), 0);
  EXPECT_EQ(snap.at("running"), false);
  EXPECT_EQ(snap.at("agents").size(), 5u);
  EXPECT_EQ(snap.at("target_stack").size(), 1u);
}

TEST(Server, PauseContract) {
  ServerOptions o;
  o.port = 0;
  o.tick_rate_hz = 200.0;
  Server server(window_scenario(), o);
  server.start();
  LineClient c(server.port());
  c.handshake();
  std::this_thread::sleep_for(100ms);
  c.send({{"type", "pause_sim"}, {"id", 7}});
  const Json ack = c.until("ack");
  EXPECT_EQ(ack.at("id"), 7);
  EXPECT_EQ(ack.at("command"), "pause_sim");
  const Json snap = c.until("snapshot");
  EXPECT_EQ(snap.at("tick"), ack.at("tick"));
  EXPECT_EQ(snap.at("running"), false);

  // No further frames while paused.
  EXPECT_FALSE(c.frame(300ms));

  c.send({{"type", "run"}});
  c.until("ack");
  const Json resumed = c.until("snapshot");
  EXPECT_GT(resumed.at("tick").get<std::int64_t>(), ack.at("tick").get<std::int64_t>());
}

TEST(Server, TwoClientsSeeIdenticalSnapshots) {
  Server server(window_scenario(), paused_options());
  server.start();
  LineClient a(server.port()), b(server.port());
  a.handshake();
  b.handshake();
  a.send({{"type", "step_n"}, {"n", 25}});
  auto collect = [](LineClient& c) {
    std::vector<std::string> snaps;
    while (snaps.size() < 26) {
      const auto l = c.line();
      if (!l) break;
      if (Json::parse(*l).at("type") == "snapshot") snaps.push_back(*l);
    }
    return snaps;
  };
  const auto sa = collect(a);
  const auto sb = collect(b);
  ASSERT_EQ(sa.size(), 26u);
  EXPECT_EQ(sa, sb);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(Json::parse(sa[i]).at("tick"), i + 1);
}

TEST(Server, StepNSemantics) {
  Server server(window_scenario(), paused_options());
  server.start();
  LineClient c(server.port());
  const Json first = c.handshake();
  c.send({{"type", "step_n"}, {"n", 1}});
  EXPECT_EQ(c.until("ack").at("tick"), first.at("tick").get<std::int64_t>() + 1);
  EXPECT_EQ(c.until("snapshot").at("tick"), 1);

  c.send({{"type", "reset"}});
  c.until("ack");
  c.until("snapshot");
  c.send({{"type", "step_n"}, {"n", 90}});
  const Json ack = c.until("ack");
  EXPECT_EQ(ack.at("tick"), 90);
  const Json snap = c.until("snapshot");
  EXPECT_EQ(snap.at("tick"), 90);
  std::map<std::string, std::uint64_t> counts;
  for (const auto& a : snap.at("agents")) counts[a.at("name")] = a.at("fire_count");
  EXPECT_EQ(counts["repulsion"], 90u);
  EXPECT_EQ(counts["attraction"], 30u);
  EXPECT_EQ(counts["operator"], 10u);
}

TEST(Server, StepNTwiceEqualsDouble) {
  Server server(window_scenario(), paused_options());
  server.start();
  LineClient c(server.port());
  c.handshake();
  // The snapshot right after the step_n ack repeats the final tick.
  auto final_snapshot = [&](std::int64_t tick) {
    EXPECT_EQ(c.until("ack").at("tick"), tick);
    return c.until("snapshot").dump();
  };
  c.send({{"type", "step_n"}, {"n", 40}});
  final_snapshot(40);
  c.send({{"type", "step_n"}, {"n", 40}});
  const std::string twice = final_snapshot(80);
  c.send({{"type", "reset"}});
  c.until("ack");
  c.until("snapshot");
  c.send({{"type", "step_n"}, {"n", 80}});
  const std::string once = final_snapshot(80);
  EXPECT_EQ(twice, once);
}

TEST(Server, StepNRejectedWhileRunning) {
  ServerOptions o;
  o.port = 0;
  o.tick_rate_hz = 100.0;
  Server server(window_scenario(), o);
  server.start();
  LineClient c(server.port());
  c.handshake();
  c.send({{"type", "step_n"}, {"n", 3}, {"id", "s"}});
  const Json err = c.until("error");
  EXPECT_EQ(err.at("id"), "s");
  EXPECT_NE(err.at("message").get<std::string>().find("running"), std::string::npos);
}

TEST(Server, MalformedFrameGetsErrorAndSessionContinues) {
  Server server(window_scenario(), paused_options());
  server.start();
  LineClient c(server.port());
  LineClient other(server.port());
  c.handshake();
  other.handshake();
  c.send_raw("{this is not json\n");
  EXPECT_NE(c.until("error").at("message").get<std::string>().find("malformed"), std::string::npos);
  c.send({{"type", "configure"}, {"command", "set_rate"}, {"agent", "nobody"}, {"value", 2}, {"id", 3}});
  const Json err = c.until("error");
  EXPECT_EQ(err.at("id"), 3);
  c.send({{"type", "warp"}});
  c.until("error");
  c.send({{"type", "step_n"}, {"n", 1}});
  EXPECT_EQ(c.until("ack").at("tick"), 1);

  // The other client saw the tick but none of the errors.
  std::vector<Json> seen;
  Json snap;
  do {
    snap = other.until("snapshot", &seen);
  } while (snap.at("tick") != 1);
  for (const auto& f : seen) EXPECT_NE(f.at("type"), "error");
}

TEST(Server, OperatorInputAckedAtFiringTick) {
  Server server(window_scenario(), paused_options());
  server.start();
  LineClient c(server.port());
  c.handshake();
  c.send({{"type", "step_n"}, {"n", 2}});
  EXPECT_EQ(c.until("ack").at("tick"), 2);
  c.send({{"type", "operator_input"}, {"dx", 0.2}, {"dy", 0.0}, {"dtheta", 0.0}, {"id", "op1"}});
  c.send({{"type", "step_n"}, {"n", 10}});
  std::vector<Json> acks;
  while (acks.size() < 2) acks.push_back(c.until("ack"));
  EXPECT_EQ(acks[0].at("id"), "op1");
  EXPECT_EQ(acks[0].at("command"), "operator_input");
  EXPECT_EQ(acks[0].at("tick"), 9);
  EXPECT_EQ(acks[1].at("command"), "step_n");
  server.stop();
  const auto& trace = server.engine().trace();
  ASSERT_GE(trace.size(), 10u);
  EXPECT_EQ(trace[9].consumed_inputs.size(), 1u);
  EXPECT_EQ(trace[2].commands.size(), 1u);
}

TEST(Server, AgentPauseShowsInNextSnapshot) {
  Server server(window_scenario(), paused_options());
  server.start();
  LineClient c(server.port());
  c.handshake();
  c.send({{"type", "configure"}, {"command", "pause"}, {"agent", "attraction"}, {"id", 1}});
  const Json ack = c.until("ack");
  EXPECT_EQ(ack.at("command"), "configure");
  const Json snap = c.until("snapshot");
  for (const auto& a : snap.at("agents")) {
    if (a.at("name") == "attraction") EXPECT_EQ(a.at("active"), false);
  }
  c.send({{"type", "step_n"}, {"n", 3}});
  Json last;
  for (int i = 0; i < 3; ++i) last = c.until("snapshot");
  EXPECT_FALSE(last.at("contributions").contains("attraction"));
}

TEST(Server, BindFailureThrows) {
  Server first(window_scenario(), paused_options());
  first.start();
  ServerOptions o = paused_options();
  o.port = first.port();
  Server second(window_scenario(), o);
  EXPECT_THROW(second.start(), ServerError);
  ServerOptions bad = paused_options();
  bad.bind_address = "not-an-address";
  Server third(window_scenario(), bad);
  EXPECT_THROW(third.start(), ServerError);
}

TEST(Server, RecordingReplaysByteForByte) {
  const fs::path dir = fs::temp_directory_path() / "vispath_server_recording";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ServerOptions o;
  o.port = 0;
  o.tick_rate_hz = 500.0;
  o.trace_path = dir / "live_trace.jsonl";
  o.script_path = dir / "live_script.jsonl";
  const Scenario scenario = window_scenario();
  {
    Server server(scenario, o);
    server.start();
    LineClient c(server.port());
    c.handshake();
    c.send({{"type", "push_waypoint"}, {"point", {0.0, -1.5, 1.6}}});
    std::this_thread::sleep_for(60ms);
    c.send({{"type", "operator_input"}, {"dx", 0.3}, {"dy", 0.1}, {"dtheta", 0.05}});
    c.send({{"type", "configure"}, {"command", "set_gain"}, {"agent", "repulsion"}, {"value", 1.5}});
    std::this_thread::sleep_for(60ms);
    c.send({{"type", "pause_sim"}});
    c.until("ack");
    c.send({{"type", "step_n"}, {"n", 5}});
    c.until("ack");
    server.stop();
  }
  Engine replay(build_world(scenario));
  run_script(replay, load_script(o.script_path));
  std::ostringstream replayed;
  write_trace(replayed, replay.trace());
  std::ifstream live(o.trace_path, std::ios::binary);
  std::stringstream live_text;
  live_text << live.rdbuf();
  EXPECT_FALSE(live_text.str().empty());
  EXPECT_EQ(replayed.str(), live_text.str());
}

}  // namespace
}  // namespace vispath
