// The shared world state, agent registry, contribution normalization, the
// rate scheduler and runtime configuration.
//
// Agents never talk to each other. Each firing agent reads the same pre-tick
// snapshot and returns a raw contribution; the step normalizes, sums and
// applies them, then re-evaluates the task status.
#pragma once

#include "vispath/geometry.hpp"
#include "vispath/manikin.hpp"
#include "vispath/pose.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace vispath {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Increment proposed by one agent for one tick.
struct Contribution {
  double dx = 0.0;           // m
  double dy = 0.0;           // m
  double dtheta = 0.0;       // rad, trunk heading
  double dalpha = 0.0;       // rad, head pitch
  double dtheta_head = 0.0;  // rad, head yaw
  double cone_delta = 0.0;   // rad, cone half-angle

  Contribution& operator+=(const Contribution& o) {
    dx += o.dx;
    dy += o.dy;
    dtheta += o.dtheta;
    dalpha += o.dalpha;
    dtheta_head += o.dtheta_head;
    cone_delta += o.cone_delta;
    return *this;
  }

  bool operator==(const Contribution&) const = default;
};

struct Normalization {
  double delta_pos = 0.05;               // m per action
  double delta_or = deg_to_rad(3.0);  // rad per action
};

enum class AgentKind { attraction, repulsion, head_orientation, visibility, operator_input };

struct AgentEntry {
  std::string name;
  AgentKind kind = AgentKind::attraction;
  int rate = 1;  // period in ticks
  bool active = true;
  double gain = 1.0;
  std::uint64_t fire_count = 0;

  bool fires_at(std::int64_t tick) const { return active && tick % rate == 0; }
};

struct Tolerances {
  double pos = 0.10;  // m
  double ang = 0.05;  // rad
};

struct GradientSteps {
  double h_pos = 0.005;  // m
  double h_ang = 0.005;  // rad
};

/// Queued operator displacement; consumed one per operator firing.
struct OperatorInput {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
  std::int64_t tick_stamp = 0;
  std::uint64_t id = 0;
};

enum class TaskStatus { in_progress, reached };

inline const char* to_string(TaskStatus s) { return s == TaskStatus::reached ? "reached" : "in_progress"; }

/// Post-step measurements kept on the blackboard for tracing and display.
struct Diagnostics {
  double planar_distance = 0.0;
  double view_angle = 0.0;  // angle(y_s, u)
  bool occluded = false;
  double collision_length = 0.0;
  double cone_collision_length = 0.0;
  double comfort = 1.0;
};

struct WorldState {
  std::int64_t tick = 0;
  ManikinPose pose;
  HeadJoints joints;
  BodyParams body;
  JointLimits limits;
  VisionCone cone;
  std::vector<PosedMesh> obstacles;
  std::vector<Point3> target_stack;  // front = final target, back = current target
  Normalization normalization;
  Tolerances tolerances;
  GradientSteps gradient_steps;
  std::vector<AgentEntry> agents;
  std::deque<OperatorInput> operator_queue;
  std::uint64_t next_input_id = 1;
  TaskStatus status = TaskStatus::in_progress;

  // Results of the last step, in registry order.
  std::vector<std::pair<std::string, Contribution>> last_contributions;
  std::vector<std::uint64_t> last_consumed_inputs;
  std::vector<std::string> last_warnings;
  Diagnostics diagnostics;

  const Point3& target() const { return target_stack.back(); }

  const AgentEntry* find_agent(const std::string& name) const {
    auto it = std::find_if(agents.begin(), agents.end(), [&](const AgentEntry& a) { return a.name == name; });
    return it == agents.end() ? nullptr : &*it;
  }
  AgentEntry* find_agent(const std::string& name) {
    return const_cast<AgentEntry*>(std::as_const(*this).find_agent(name));
  }
};

/// Rescale translation to at most delta_pos*gain, clamp each rotation to
/// +/- delta_or*gain. cone_delta passes through.
inline Contribution normalize(const Contribution& raw, const Normalization& n, double gain = 1.0) {
  Contribution out = raw;
  const double cap_pos = n.delta_pos * gain;
  const double cap_or = n.delta_or * gain;
  const double norm = std::hypot(raw.dx, raw.dy);
  if (norm > cap_pos) {
    out.dx = raw.dx * (cap_pos / norm);
    out.dy = raw.dy * (cap_pos / norm);
  }
  out.dtheta = std::clamp(raw.dtheta, -cap_or, cap_or);
  out.dalpha = std::clamp(raw.dalpha, -cap_or, cap_or);
  out.dtheta_head = std::clamp(raw.dtheta_head, -cap_or, cap_or);
  return out;
}

inline void apply_contribution(WorldState& w, const Contribution& c) {
  w.pose = ManikinPose{w.pose.x + c.dx, w.pose.y + c.dy, wrap_angle(w.pose.theta + c.dtheta)};
  HeadJoints q = w.joints;
  q.alpha += c.dalpha;
  q.theta += c.dtheta_head;
  w.joints = clamp_joints(q, w.limits);
  w.cone.eps_c = std::clamp(w.cone.eps_c + c.cone_delta, w.cone.eps_min, w.cone.eps_max);
}

/// Cone from the eye center to the current target; empty when degenerate.
inline std::optional<PosedMesh> vision_cone_mesh(const WorldState& w, const ManikinPose& pose, const HeadJoints& q) {
  const Point3 s = eye_center(pose, q, w.body);
  if ((w.target() - s).norm() < 1e-6) return std::nullopt;
  auto mesh = std::make_shared<const TriMesh>(make_cone_mesh(s, w.target(), w.cone.eps_c, w.cone.facets));
  return PosedMesh(std::move(mesh), Rigid3::Identity());
}

inline double cone_collision_length(const WorldState& w, const ManikinPose& pose, const HeadJoints& q) {
  const auto cone = vision_cone_mesh(w, pose, q);
  if (!cone) return 0.0;
  return collision_length(std::span<const PosedMesh>(&*cone, 1), w.obstacles);
}

inline Diagnostics diagnose(const WorldState& w) {
  Diagnostics d;
  const Point3& t = w.target();
  d.planar_distance = std::hypot(t.x() - w.pose.x, t.y() - w.pose.y);
  const Point3 s = eye_center(w.pose, w.joints, w.body);
  const Vec3 st = t - s;
  if (st.norm() > 1e-12) {
    const double c = std::clamp(vision_axis(w.pose, w.joints).dot(st.normalized()), -1.0, 1.0);
    d.view_angle = std::acos(c);
    d.occluded = segment_occluded(Segment3{s, t}, w.obstacles);
  }
  d.collision_length = collision_length(place_members(w.pose, w.joints, w.body), w.obstacles);
  d.cone_collision_length = cone_collision_length(w, w.pose, w.joints);
  d.comfort = comfort_score(w.joints, w.limits);
  return d;
}

inline bool target_attained(const WorldState& w, const Diagnostics& d) {
  return d.planar_distance <= w.tolerances.pos && d.view_angle <= w.tolerances.ang && !d.occluded &&
         d.collision_length == 0.0;
}

/// Refresh diagnostics; pop an attained intermediate target or mark the
/// final target reached.
inline TaskStatus update_task_status(WorldState& w) {
  w.diagnostics = diagnose(w);
  if (w.status == TaskStatus::reached) return w.status;
  if (target_attained(w, w.diagnostics)) {
    if (w.target_stack.size() > 1) {
      w.target_stack.pop_back();
    } else {
      w.status = TaskStatus::reached;
    }
  }
  return w.status;
}

/// What an agent returns for one firing.
struct Proposal {
  Contribution raw;
  std::optional<std::uint64_t> consumed_input;
  std::string warning;
};

/// One scheduler tick. `propose(entry, snapshot)` must be a pure function of
/// its arguments and return a Proposal. Stepping a reached world is a no-op.
template <class ProposeFn>
WorldState step(const WorldState& world, ProposeFn&& propose) {
  if (world.status == TaskStatus::reached) return world;
  const WorldState& snapshot = world;
  WorldState next = world;
  next.last_contributions.clear();
  next.last_consumed_inputs.clear();
  next.last_warnings.clear();

  Contribution total;
  for (auto& entry : next.agents) {
    if (!entry.fires_at(world.tick)) continue;
    Proposal p = propose(entry, snapshot);
    const Contribution c = normalize(p.raw, world.normalization, entry.gain);
    total += c;
    ++entry.fire_count;
    next.last_contributions.emplace_back(entry.name, c);
    if (p.consumed_input) {
      next.last_consumed_inputs.push_back(*p.consumed_input);
      std::erase_if(next.operator_queue, [&](const OperatorInput& in) { return in.id == *p.consumed_input; });
    }
    if (!p.warning.empty()) next.last_warnings.push_back(entry.name + ": " + p.warning);
  }
  apply_contribution(next, total);
  update_task_status(next);
  ++next.tick;
  return next;
}

// Runtime configuration commands. Angles in radians, lengths in meters.
namespace command {
struct SetRate {
  std::string agent;
  int rate = 1;
};
struct Pause {
  std::string agent;
};
struct Resume {
  std::string agent;
};
struct SetDeltaPos {
  double value = 0.0;
};
struct SetDeltaOr {
  double value = 0.0;
};
struct SetGain {
  std::string agent;
  double value = 1.0;
};
struct PushIntermediateTarget {
  Point3 point = Point3::Zero();
};
struct SetTarget {
  Point3 point = Point3::Zero();
};
struct OperatorMove {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};
}  // namespace command

using Command = std::variant<command::SetRate, command::Pause, command::Resume, command::SetDeltaPos,
                             command::SetDeltaOr, command::SetGain, command::PushIntermediateTarget,
                             command::SetTarget, command::OperatorMove>;

namespace detail {
inline AgentEntry& agent_or_throw(WorldState& w, const std::string& name) {
  if (auto* a = w.find_agent(name)) return *a;
  throw ConfigError("unknown agent '" + name + "'");
}
inline double positive_or_throw(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
  return v;
}
inline const Point3& finite_point_or_throw(const Point3& p) {
  if (!p.allFinite()) throw ConfigError("target point must be finite");
  return p;
}
}  // namespace detail

/// Apply a command before the next step. Returns the id of the queued
/// operator input for OperatorMove, otherwise nullopt.
inline std::optional<std::uint64_t> configure(WorldState& w, const Command& cmd) {
  using namespace command;
  std::optional<std::uint64_t> queued;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, SetRate>) {
          auto& a = detail::agent_or_throw(w, c.agent);
          if (c.rate < 1) throw ConfigError("rate must be a positive integer");
          a.rate = c.rate;
        } else if constexpr (std::is_same_v<T, Pause>) {
          detail::agent_or_throw(w, c.agent).active = false;
        } else if constexpr (std::is_same_v<T, Resume>) {
          detail::agent_or_throw(w, c.agent).active = true;
        } else if constexpr (std::is_same_v<T, SetDeltaPos>) {
          w.normalization.delta_pos = detail::positive_or_throw(c.value, "delta_pos");
        } else if constexpr (std::is_same_v<T, SetDeltaOr>) {
          w.normalization.delta_or = detail::positive_or_throw(c.value, "delta_or");
        } else if constexpr (std::is_same_v<T, SetGain>) {
          auto& a = detail::agent_or_throw(w, c.agent);
          a.gain = detail::positive_or_throw(c.value, "gain");
        } else if constexpr (std::is_same_v<T, PushIntermediateTarget>) {
          w.target_stack.push_back(detail::finite_point_or_throw(c.point));
          w.status = TaskStatus::in_progress;
        } else if constexpr (std::is_same_v<T, SetTarget>) {
          w.target_stack.assign(1, detail::finite_point_or_throw(c.point));
          w.status = TaskStatus::in_progress;
        } else if constexpr (std::is_same_v<T, OperatorMove>) {
          if (!std::isfinite(c.dx) || !std::isfinite(c.dy) || !std::isfinite(c.dtheta)) {
            throw ConfigError("operator input must be finite");
          }
          const std::uint64_t id = w.next_input_id++;
          w.operator_queue.push_back(OperatorInput{c.dx, c.dy, c.dtheta, w.tick, id});
          queued = id;
        }
      },
      cmd);
  return queued;
}

}  // namespace vispath
