// Stepping loop owner: applies timed commands at tick boundaries, steps the
// blackboard and records one trace record per tick plus the applied-command
// script needed to replay the run.
#pragma once

#include "vispath/agents.hpp"
#include "vispath/blackboard.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vispath {

struct TraceRecord {
  std::int64_t tick = 0;
  TaskStatus status = TaskStatus::in_progress;
  ManikinPose pose;
  HeadJoints joints;
  double eps_c = 0.0;
  Diagnostics diagnostics;
  std::size_t targets_remaining = 0;
  Point3 target = Point3::Zero();
  std::vector<std::pair<std::string, Contribution>> contributions;
  std::vector<Command> commands;
  std::vector<std::uint64_t> consumed_inputs;
  std::vector<std::string> warnings;
};

struct TimedCommand {
  std::int64_t tick = 0;
  Command command;
};

/// Commands stamped with the tick before which they were applied, plus the
/// tick count at which the recording ended (if known).
struct Script {
  std::vector<TimedCommand> commands;
  std::optional<std::int64_t> end_tick;
};

class Engine {
 public:
  explicit Engine(WorldState initial) : world_(std::move(initial)) { update_task_status(world_); }

  const WorldState& world() const { return world_; }
  std::int64_t tick() const { return world_.tick; }
  bool reached() const { return world_.status == TaskStatus::reached; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  const std::vector<TimedCommand>& applied() const { return applied_; }

  /// Apply a command now, before the next step. Throws ConfigError and leaves
  /// the world untouched when the command is invalid.
  std::optional<std::uint64_t> apply(const Command& cmd) {
    WorldState next = world_;
    const auto queued = configure(next, cmd);
    world_ = std::move(next);
    applied_.push_back({world_.tick, cmd});
    pending_.push_back(cmd);
    return queued;
  }

  /// One tick. Returns false (and records nothing) when already reached.
  bool advance() {
    if (reached()) return false;
    const std::int64_t t = world_.tick;
    world_ = step(world_);
    TraceRecord r;
    r.tick = t;
    r.status = world_.status;
    r.pose = world_.pose;
    r.joints = world_.joints;
    r.eps_c = world_.cone.eps_c;
    r.diagnostics = world_.diagnostics;
    r.targets_remaining = world_.target_stack.size();
    r.target = world_.target();
    r.contributions = world_.last_contributions;
    r.commands = std::exchange(pending_, {});
    r.consumed_inputs = world_.last_consumed_inputs;
    r.warnings = world_.last_warnings;
    trace_.push_back(std::move(r));
    return true;
  }

  Script script() const { return Script{applied_, world_.tick}; }

 private:
  WorldState world_;
  std::vector<TraceRecord> trace_;
  std::vector<TimedCommand> applied_;
  std::vector<Command> pending_;
};

/// Drive `engine` with a timed script until reached, the script's end tick,
/// or `max_ticks` total ticks, whichever comes first. Commands stamped with
/// tick t are applied right before the step with index t.
inline void run_script(Engine& engine, const Script& script,
                       std::int64_t max_ticks = std::numeric_limits<std::int64_t>::max()) {
  const std::int64_t limit = script.end_tick ? std::min(*script.end_tick, max_ticks) : max_ticks;
  std::size_t next = 0;
  const auto& cmds = script.commands;
  while (true) {
    while (next < cmds.size() && cmds[next].tick <= engine.tick()) {
      try {
        engine.apply(cmds[next].command);
      } catch (const ConfigError& e) {
        throw ConfigError("script command " + std::to_string(next + 1) + " at tick " +
                          std::to_string(cmds[next].tick) + ": " + e.what());
      }
      ++next;
    }
    if (engine.reached() || engine.tick() >= limit) break;
    engine.advance();
  }
}

}  // namespace vispath
