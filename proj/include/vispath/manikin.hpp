// Simplified manikin: trunk pose, limited head articulation, eye and vision
// axis kinematics, member placement, vision cone state and comfort.
//
// Frames: world z is up. The trunk frame has x to the right, y forward and
// z up, with its origin on the floor. The head frame is attached at
// neck_height above the trunk origin and rotated by head_rotation().
#pragma once

#include "vispath/geometry.hpp"
#include "vispath/pose.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

namespace vispath {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Head articulation q_b. alpha: pitch about the trunk lateral axis (positive
/// looks up); beta: lateral bend about the forward axis; theta: yaw about the
/// vertical axis (positive turns left).
struct HeadJoints {
  double alpha = 0.0;
  double beta = 0.0;
  double theta = 0.0;

  bool operator==(const HeadJoints&) const = default;
};

struct JointRange {
  double min = 0.0;
  double max = 0.0;
  double neutral = 0.0;

  bool valid() const { return min <= neutral && neutral <= max; }
  bool operator==(const JointRange&) const = default;
};

/// Ergonomic limits. Defaults are configuration, not measured data.
struct JointLimits {
  JointRange alpha{deg_to_rad(-60.0), deg_to_rad(45.0), 0.0};
  JointRange beta{deg_to_rad(-40.0), deg_to_rad(40.0), 0.0};
  JointRange theta{deg_to_rad(-60.0), deg_to_rad(60.0), 0.0};

  bool valid() const { return alpha.valid() && beta.valid() && theta.valid(); }
  bool operator==(const JointLimits&) const = default;
};

inline MeshPtr default_trunk_mesh() {
  return std::make_shared<const TriMesh>(make_box_mesh({-0.2, -0.12, 0.0}, {0.2, 0.12, 1.4}));
}

inline MeshPtr default_head_mesh() {
  return std::make_shared<const TriMesh>(make_box_mesh({-0.08, -0.1, -0.02}, {0.08, 0.1, 0.22}));
}

struct BodyParams {
  double neck_height = 1.5;  // trunk origin to head joint
  double eye_forward = 0.0;  // head joint to eye center, head frame
  double eye_up = 0.1;
  MeshPtr trunk = default_trunk_mesh();
  MeshPtr head = default_head_mesh();
};

/// Vision cone C: apex at the eye center, axis towards the target, variable
/// half-angle eps_c clamped to [eps_min, eps_max].
struct VisionCone {
  double eps_c = 0.05;
  double eps_min = 0.05;
  double eps_max = 0.35;
  double delta_eps = 0.01;
  int facets = 8;

  bool valid() const {
    return eps_min > 0.0 && eps_min <= eps_c && eps_c <= eps_max && eps_max < std::numbers::pi / 2 &&
           delta_eps >= 0.0 && facets >= 3;
  }
};

inline Eigen::Matrix3d yaw_matrix(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }
inline Eigen::Matrix3d pitch_matrix(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Eigen::Matrix3d bend_matrix(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }

/// Trunk frame -> head frame rotation, yaw(theta) * pitch(alpha) * bend(beta).
inline Eigen::Matrix3d head_rotation(const HeadJoints& q) {
  return yaw_matrix(q.theta) * pitch_matrix(q.alpha) * bend_matrix(q.beta);
}

inline Rigid3 head_transform(const ManikinPose& pose, const HeadJoints& q, const BodyParams& body) {
  Rigid3 t = pose.transform();
  t.translate(Vec3(0.0, 0.0, body.neck_height));
  t.rotate(head_rotation(q));
  return t;
}

/// Eye center S in world coordinates.
inline Point3 eye_center(const ManikinPose& pose, const HeadJoints& q, const BodyParams& body) {
  return head_transform(pose, q, body) * Vec3(0.0, body.eye_forward, body.eye_up);
}

/// Vision axis y_s: head forward axis in world coordinates.
inline Vec3 vision_axis(const ManikinPose& pose, const HeadJoints& q) {
  return (yaw_matrix(pose.theta) * head_rotation(q) * Vec3::UnitY()).normalized();
}

inline double clamp_to(double v, const JointRange& r) { return std::clamp(v, r.min, r.max); }

inline HeadJoints clamp_joints(const HeadJoints& q, const JointLimits& limits) {
  return {clamp_to(q.alpha, limits.alpha), clamp_to(q.beta, limits.beta), clamp_to(q.theta, limits.theta)};
}

inline bool within_limits(const HeadJoints& q, const JointLimits& l) {
  auto in = [](double v, const JointRange& r) { return v >= r.min && v <= r.max; };
  return in(q.alpha, l.alpha) && in(q.beta, l.beta) && in(q.theta, l.theta);
}

/// 1 - mean normalized deviation from neutral; 1 at neutral, 0 when every
/// joint sits at its farthest limit.
inline double comfort_score(const HeadJoints& q, const JointLimits& limits) {
  auto dev = [](double v, const JointRange& r) {
    const double span = std::max(std::abs(r.max - r.neutral), std::abs(r.min - r.neutral));
    if (span <= 0.0) return 0.0;
    return std::min(1.0, std::abs(v - r.neutral) / span);
  };
  const double mean = (dev(q.alpha, limits.alpha) + dev(q.beta, limits.beta) + dev(q.theta, limits.theta)) / 3.0;
  return std::clamp(1.0 - mean, 0.0, 1.0);
}

/// Members posed in the world, in fixed order (trunk, head).
inline std::vector<PosedMesh> place_members(const ManikinPose& pose, const HeadJoints& q, const BodyParams& body) {
  return {PosedMesh(body.trunk, pose.transform()), PosedMesh(body.head, head_transform(pose, q, body))};
}

}  // namespace vispath
