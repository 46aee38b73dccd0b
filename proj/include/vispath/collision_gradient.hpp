// Gradient of the collision-line length with respect to the trunk pose.
#pragma once

#include "vispath/finite_difference.hpp"
#include "vispath/geometry.hpp"
#include "vispath/pose.hpp"

#include <span>
#include <vector>

namespace vispath {

inline constexpr double kDefaultGradientStepPos = 0.005;  // m
inline constexpr double kDefaultGradientStepAng = 0.005;  // rad

/// Rigidly move members attached to the trunk from `from` to `to`.
inline std::vector<PosedMesh> repose(std::span<const PosedMesh> members, const ManikinPose& from,
                                     const ManikinPose& to) {
  const Rigid3 delta = to.transform() * from.transform().inverse();
  std::vector<PosedMesh> out;
  out.reserve(members.size());
  for (const auto& m : members) out.emplace_back(m.mesh, delta * m.pose);
  return out;
}

/// Central differences of L(pose) = collision length of `subject` (posed at
/// `pose`) against `obstacles`, in (dL/dx, dL/dy, dL/dtheta).
inline Vec3 collision_gradient(std::span<const PosedMesh> subject, std::span<const PosedMesh> obstacles,
                               const ManikinPose& pose, double h_pos = kDefaultGradientStepPos,
                               double h_ang = kDefaultGradientStepAng) {
  if (!(h_pos > 0.0) || !(h_ang > 0.0)) throw GeometryError("collision_gradient: steps must be positive");
  auto length_at = [&](const std::array<double, 3>& p) {
    const auto moved = repose(subject, pose, ManikinPose{p[0], p[1], p[2]});
    return collision_length(moved, obstacles);
  };
  const auto g = central_gradient<3>(length_at, {pose.x, pose.y, pose.theta}, {h_pos, h_pos, h_ang});
  return {g[0], g[1], g[2]};
}

}  // namespace vispath
