// Planar trunk pose of the manikin.
#pragma once

#include "vispath/geometry.hpp"

namespace vispath {

/// Trunk pose in the floor plane. theta is the heading of the trunk forward
/// axis; theta = 0 faces world +y, positive theta turns left (about +z).
struct ManikinPose {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double theta = 0.0;  // rad, (-pi, pi]

  Rigid3 transform() const { return planar_transform(x, y, 0.0, theta); }

  Vec3 forward() const { return {-std::sin(theta), std::cos(theta), 0.0}; }

  ManikinPose normalized() const { return {x, y, wrap_angle(theta)}; }

  bool operator==(const ManikinPose&) const = default;
};

}  // namespace vispath
