// The elementary agents. Each is a pure function of a world snapshot that
// returns a raw (un-normalized) contribution.
#pragma once

#include "vispath/blackboard.hpp"
#include "vispath/collision_gradient.hpp"
#include "vispath/finite_difference.hpp"
#include "vispath/manikin.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace vispath {

namespace agent_names {
inline constexpr const char* attraction = "attraction";
inline constexpr const char* repulsion = "repulsion";
inline constexpr const char* head_orientation = "head_orientation";
inline constexpr const char* visibility = "visibility";
inline constexpr const char* operator_input = "operator";
}  // namespace agent_names

/// Registry in firing order. Repulsion, visibility and head orientation act
/// every tick; attraction every 3rd; the operator every 9th.
inline std::vector<AgentEntry> default_agents() {
  return {
      {agent_names::attraction, AgentKind::attraction, 3, true, 1.0, 0},
      {agent_names::repulsion, AgentKind::repulsion, 1, true, 1.0, 0},
      {agent_names::head_orientation, AgentKind::head_orientation, 1, true, 1.0, 0},
      {agent_names::visibility, AgentKind::visibility, 1, true, 1.0, 0},
      {agent_names::operator_input, AgentKind::operator_input, 9, true, 1.0, 0},
  };
}

/// Per-snapshot vision quantities: eye center S, target T, u = (T-S)/|T-S|,
/// vision axis y_s.
struct VisionGeometry {
  Point3 eye = Point3::Zero();
  Point3 target = Point3::Zero();
  Vec3 u = Vec3::UnitY();
  Vec3 axis = Vec3::UnitY();
  double distance = 0.0;

  Segment3 sight_line() const { return {eye, target}; }
  double angle() const { return std::acos(std::clamp(axis.dot(u), -1.0, 1.0)); }
};

inline VisionGeometry vision_geometry(const WorldState& w) {
  VisionGeometry g;
  g.eye = eye_center(w.pose, w.joints, w.body);
  g.target = w.target();
  const Vec3 st = g.target - g.eye;
  g.distance = st.norm();
  if (g.distance > 0.0) g.u = st / g.distance;
  g.axis = vision_axis(w.pose, w.joints);
  return g;
}

/// Heading (trunk convention) of a floor-plane direction.
inline double heading_of(double vx, double vy) { return std::atan2(-vx, vy); }

/// Pull the trunk onto the target's floor projection and turn its forward
/// axis towards the floor projection of u.
inline Contribution attraction_propose(const WorldState& w) {
  Contribution c;
  const Point3& t = w.target();
  c.dx = t.x() - w.pose.x;
  c.dy = t.y() - w.pose.y;
  const Vec3 u = t - eye_center(w.pose, w.joints, w.body);
  if (std::hypot(u.x(), u.y()) > 1e-9) c.dtheta = wrap_angle(heading_of(u.x(), u.y()) - w.pose.theta);
  return c;
}

/// Descend the gradient of the manikin/environment collision length.
inline Contribution repulsion_propose(const WorldState& w) {
  const auto members = place_members(w.pose, w.joints, w.body);
  if (collision_length(members, w.obstacles) == 0.0) return {};
  const Vec3 g = collision_gradient(members, w.obstacles, w.pose, w.gradient_steps.h_pos, w.gradient_steps.h_ang);
  Contribution c;
  c.dx = -g.x();
  c.dy = -g.y();
  c.dtheta = -g.z();
  return c;
}

/// Increment taking `current` to `desired` clamped into `r`. Rounding of
/// `current + increment` could land one ulp outside the range, so the
/// increment is nudged back until the sum is inside.
inline double increment_within(double current, double desired, const JointRange& r) {
  const double goal = clamp_to(desired, r);
  double d = goal - current;
  while (current + d > r.max) d = std::nextafter(d, -HUGE_VAL);
  while (current + d < r.min) d = std::nextafter(d, HUGE_VAL);
  return d;
}

/// Yaw and pitch the head so the vision axis points along u, never past a
/// joint limit.
inline Contribution head_orientation_propose(const WorldState& w) {
  const Point3 s = eye_center(w.pose, w.joints, w.body);
  const Vec3 st = w.target() - s;
  if (st.norm() < 1e-12) return {};
  const Vec3 local = yaw_matrix(-w.pose.theta) * st;
  const double azimuth = heading_of(local.x(), local.y());
  const double elevation = std::atan2(local.z(), std::hypot(local.x(), local.y()));

  Contribution c;
  c.dtheta_head = increment_within(w.joints.theta, w.joints.theta + wrap_angle(azimuth - w.joints.theta), w.limits.theta);
  c.dalpha = increment_within(w.joints.alpha, elevation, w.limits.alpha);
  return c;
}

/// Result of the visibility agent including any trace warning.
struct VisibilityProposal {
  Contribution raw;
  std::string warning;
};

/// Push the trunk and head away from cone/environment interference and adapt
/// the cone width: widen while y_s is inside the cone, narrow otherwise.
inline VisibilityProposal visibility_propose_detailed(const WorldState& w) {
  const VisionGeometry g = vision_geometry(w);
  if (g.distance < 1e-6) return {{}, "eye center coincides with target"};

  Contribution c;
  c.cone_delta = g.angle() <= w.cone.eps_c ? w.cone.delta_eps : -w.cone.delta_eps;

  if (cone_collision_length(w, w.pose, w.joints) > 0.0) {
    auto length_at = [&](const std::array<double, 5>& p) {
      const ManikinPose pose{p[0], p[1], p[2]};
      HeadJoints q = w.joints;
      q.alpha = p[3];
      q.theta = p[4];
      return cone_collision_length(w, pose, q);
    };
    const double hp = w.gradient_steps.h_pos;
    const double ha = w.gradient_steps.h_ang;
    const auto grad = central_gradient<5>(
        length_at, {w.pose.x, w.pose.y, w.pose.theta, w.joints.alpha, w.joints.theta}, {hp, hp, ha, ha, ha});
    c.dx = -grad[0];
    c.dy = -grad[1];
    c.dtheta = -grad[2];
    c.dalpha = -grad[3];
    c.dtheta_head = -grad[4];
  }
  return {c, {}};
}

inline Contribution visibility_propose(const WorldState& w) { return visibility_propose_detailed(w).raw; }

/// Oldest queued operator input stamped at or before the current tick.
inline const OperatorInput* next_operator_input(const WorldState& w) {
  for (const auto& in : w.operator_queue) {
    if (in.tick_stamp <= w.tick) return &in;
  }
  return nullptr;
}

inline Contribution operator_propose(const WorldState& w) {
  const OperatorInput* in = next_operator_input(w);
  if (!in) return {};
  Contribution c;
  c.dx = in->dx;
  c.dy = in->dy;
  c.dtheta = in->dtheta;
  return c;
}

/// Dispatch for the scheduler.
inline Proposal propose(const AgentEntry& entry, const WorldState& w) {
  Proposal p;
  switch (entry.kind) {
    case AgentKind::attraction:
      p.raw = attraction_propose(w);
      break;
    case AgentKind::repulsion:
      p.raw = repulsion_propose(w);
      break;
    case AgentKind::head_orientation:
      p.raw = head_orientation_propose(w);
      break;
    case AgentKind::visibility: {
      auto v = visibility_propose_detailed(w);
      p.raw = v.raw;
      p.warning = std::move(v.warning);
      break;
    }
    case AgentKind::operator_input:
      p.raw = operator_propose(w);
      if (const auto* in = next_operator_input(w)) p.consumed_input = in->id;
      break;
  }
  return p;
}

inline WorldState step(const WorldState& world) { return step(world, propose); }

}  // namespace vispath
